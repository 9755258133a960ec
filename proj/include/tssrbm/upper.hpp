#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "params.hpp"
#include "random.hpp"
#include "ssrbm.hpp"

namespace tssrbm {

namespace detail {

/// Side length of `maps` equal square maps holding `size` values.
inline std::size_t map_side(std::size_t size, std::size_t maps) {
  if (maps == 0 || size % maps != 0) throw DimensionError("state size is not a multiple of the map count");
  const std::size_t area = size / maps;
  auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(area))));
  if (side * side != area) throw DimensionError("maps are not square");
  return side;
}

}  // namespace detail

/// Second-layer RBM: spike-and-slab visible units (s, h) on the first
/// layer's feature maps, binary hiddens g with convolutional sharing.
///
///   E(s,h,g) = - sum_ij g_j U_ij s_i h_i - sum_j rho_j g_j + 1/2 sum_i alpha_i s_i^2
///              - sum_i alpha_i mu_i s_i h_i - sum_i b_i h_i [+ 1/2 sum_i alpha_i mu_i^2 h_i]
///
/// The bracketed term is on when bias_shift is set (the default); it mirrors
/// the last term of the first-layer energy.
struct SsVisRbmParams {
  std::size_t input_maps = 0;
  std::size_t kernel = 2;
  std::size_t filters = 0;
  std::vector<double> U;      // [filter][input map][row][col]
  std::vector<double> rho;    // per g filter
  std::vector<double> alpha;  // per input map
  std::vector<double> mu;     // per input map
  std::vector<double> b;      // per input map
  bool bias_shift = true;

  ConvGeometry geometry(std::size_t map_size) const {
    return build_conv_geometry(input_maps, map_size, kernel, filters);
  }
  ConvGeometry geometry_for(std::size_t visible_units) const {
    return geometry(detail::map_side(visible_units, input_maps));
  }

  template <class Fn>
  void visit(Fn&& fn) {
    fn(std::string_view("U"), std::span<double>(U));
    fn(std::string_view("rho"), std::span<double>(rho));
    fn(std::string_view("alpha"), std::span<double>(alpha));
    fn(std::string_view("mu"), std::span<double>(mu));
    fn(std::string_view("b"), std::span<double>(b));
  }
  template <class Fn>
  void visit(Fn&& fn) const {
    fn(std::string_view("U"), std::span<const double>(U));
    fn(std::string_view("rho"), std::span<const double>(rho));
    fn(std::string_view("alpha"), std::span<const double>(alpha));
    fn(std::string_view("mu"), std::span<const double>(mu));
    fn(std::string_view("b"), std::span<const double>(b));
  }

  bool operator==(const SsVisRbmParams&) const = default;
};

inline SsVisRbmParams make_ssvis_params(std::size_t input_maps, std::size_t kernel, std::size_t filters) {
  SsVisRbmParams p;
  p.input_maps = input_maps;
  p.kernel = kernel;
  p.filters = filters;
  p.U.assign(filters * input_maps * kernel * kernel, 0.0);
  p.rho.assign(filters, 0.0);
  p.alpha.assign(input_maps, 1.0);
  p.mu.assign(input_maps, 0.0);
  p.b.assign(input_maps, 0.0);
  return p;
}

/// Copies alpha, mu and b from the first layer (per filter), U ~ N(0, weight_std^2), rho = 0.
inline SsVisRbmParams init_from_lower(const SsRbmParams& first, std::size_t filters, std::size_t kernel,
                                      Rng& rng, double weight_std = 0.01) {
  const std::size_t maps = first.num_filters();
  if (first.alpha.size() != maps || first.mu.size() != maps || first.b.size() != maps) {
    throw DimensionError("first-layer parameter arrays do not match its filter count");
  }
  SsVisRbmParams p = make_ssvis_params(maps, kernel, filters);
  p.alpha = first.alpha;
  p.mu = first.mu;
  p.b = first.b;
  std::normal_distribution<double> normal(0.0, weight_std);
  for (auto& u : p.U) u = normal(rng);
  return p;
}

inline void apply_constraints(SsVisRbmParams& p, const SsRbmConstraints& c = {}) {
  for (auto& a : p.alpha) a = std::max(a, c.alpha_min);
}

namespace detail {

inline void check_visible2(const SpikeSlabState& st, const ConvGeometry& g) {
  if (st.h.size() != g.num_inputs() || st.s.size() != g.num_inputs()) {
    throw DimensionError("spike/slab state does not match second-layer geometry");
  }
}

inline std::vector<double> gated(const SpikeSlabState& st) {
  std::vector<double> sh(st.h.size());
  for (std::size_t i = 0; i < sh.size(); ++i) sh[i] = st.s[i] * st.h[i];
  return sh;
}

inline std::size_t map_of(const ConvGeometry& g, std::size_t i) { return i / (g.map_size * g.map_size); }

}  // namespace detail

/// sum_i U_ij s_i h_i + rho_j.
inline std::vector<double> g_logits(const SpikeSlabState& st, const SsVisRbmParams& p) {
  const ConvGeometry g = p.geometry_for(st.h.size());
  detail::check_visible2(st, g);
  std::vector<double> out = conv_forward(detail::gated(st), p.U, g);
  const std::size_t per = g.out_size * g.out_size;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += p.rho[j / per];
  return out;
}

inline std::vector<double> g_activation(const SpikeSlabState& st, const SsVisRbmParams& p) {
  std::vector<double> out = g_logits(st, p);
  for (auto& x : out) x = sigmoid(std::clamp(x, -kLogitClamp, kLogitClamp));
  return out;
}

inline std::vector<double> sample_g_given_sh(const SpikeSlabState& st, const SsVisRbmParams& p, Rng& rng) {
  return sample_bernoulli(g_activation(st, p), rng);
}

/// Top-down drive d_i = sum_j U_ij g_j.
inline std::vector<double> top_down_drive(std::span<const double> g, const SsVisRbmParams& p,
                                          const ConvGeometry& geom) {
  return conv_adjoint(g, p.U, geom);
}

/// Unclamped argument of P(h_i = 1 | g), obtained by integrating s out of the energy:
/// 1/2 alpha^-1 d^2 + mu d + b, plus 1/2 alpha mu^2 when the bias-shift term is off.
inline std::vector<double> h_logits_given_g(std::span<const double> g, const SsVisRbmParams& p,
                                            const ConvGeometry& geom) {
  const std::vector<double> d = top_down_drive(g, p, geom);
  std::vector<double> out(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::size_t c = detail::map_of(geom, i);
    const double a = p.alpha[c], m = p.mu[c];
    out[i] = 0.5 * d[i] * d[i] / a + m * d[i] + p.b[c];
    if (!p.bias_shift) out[i] += 0.5 * a * m * m;
  }
  return out;
}

inline std::vector<double> h_activation_given_g(std::span<const double> g, const SsVisRbmParams& p,
                                                const ConvGeometry& geom) {
  std::vector<double> out = h_logits_given_g(g, p, geom);
  for (auto& x : out) x = sigmoid(std::clamp(x, -kLogitClamp, kLogitClamp));
  return out;
}

struct SpikeDraw {
  std::vector<double> h;
  std::vector<double> activation;
};

inline SpikeDraw sample_h_given_g(std::span<const double> g, const SsVisRbmParams& p, const ConvGeometry& geom,
                                  Rng& rng) {
  SpikeDraw out;
  out.activation = h_activation_given_g(g, p, geom);
  out.h = sample_bernoulli(out.activation, rng);
  return out;
}

/// E[s | h, g] = (alpha^-1 d + mu) h.
inline std::vector<double> slab_mean2(std::span<const double> h, std::span<const double> g,
                                      const SsVisRbmParams& p, const ConvGeometry& geom) {
  if (h.size() != geom.num_inputs()) throw DimensionError("spike vector does not match geometry");
  const std::vector<double> d = top_down_drive(g, p, geom);
  std::vector<double> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const std::size_t c = detail::map_of(geom, i);
    out[i] = (d[i] / p.alpha[c] + p.mu[c]) * h[i];
  }
  return out;
}

inline std::vector<double> sample_s_given_hg(std::span<const double> h, std::span<const double> g,
                                             const SsVisRbmParams& p, const ConvGeometry& geom, Rng& rng) {
  std::vector<double> s = slab_mean2(h, g, p, geom);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < s.size(); ++i) s[i] += normal(rng) / std::sqrt(p.alpha[detail::map_of(geom, i)]);
  return s;
}

inline double energy2(const SpikeSlabState& st, std::span<const double> g, const SsVisRbmParams& p) {
  const ConvGeometry geom = p.geometry_for(st.h.size());
  detail::check_visible2(st, geom);
  if (g.size() != geom.num_outputs()) throw DimensionError("g does not match second-layer geometry");
  const std::vector<double> x = conv_forward(detail::gated(st), p.U, geom);
  const std::size_t per = geom.out_size * geom.out_size;
  double e = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) e -= g[j] * (x[j] + p.rho[j / per]);
  for (std::size_t i = 0; i < st.h.size(); ++i) {
    const std::size_t c = detail::map_of(geom, i);
    const double a = p.alpha[c], m = p.mu[c], s = st.s[i], h = st.h[i];
    e += 0.5 * a * s * s - a * m * s * h - p.b[c] * h;
    if (p.bias_shift) e += 0.5 * a * m * m * h;
  }
  return e;
}

/// -log sum_g exp(-E(s,h,g)).
inline double free_energy2(const SpikeSlabState& st, const SsVisRbmParams& p) {
  const ConvGeometry geom = p.geometry_for(st.h.size());
  double f = 0.0;
  for (std::size_t i = 0; i < st.h.size(); ++i) {
    const std::size_t c = detail::map_of(geom, i);
    const double a = p.alpha[c], m = p.mu[c], s = st.s[i], h = st.h[i];
    f += 0.5 * a * s * s - a * m * s * h - p.b[c] * h;
    if (p.bias_shift) f += 0.5 * a * m * m * h;
  }
  for (double x : g_logits(st, p)) f -= softplus(x);
  return f;
}

struct UpperSweep {
  std::vector<double> g;
  std::vector<double> h;
  std::vector<double> h_activation;
  std::vector<double> s;
};

/// g ~ P(g|s,h), then h ~ P(h|g), s ~ p(s|h,g).
inline UpperSweep gibbs_sweep2(const SpikeSlabState& st, const SsVisRbmParams& p, Rng& rng) {
  const ConvGeometry geom = p.geometry_for(st.h.size());
  UpperSweep out;
  out.g = sample_g_given_sh(st, p, rng);
  SpikeDraw hd = sample_h_given_g(out.g, p, geom, rng);
  out.h = std::move(hd.h);
  out.h_activation = std::move(hd.activation);
  out.s = sample_s_given_hg(out.h, out.g, p, geom, rng);
  return out;
}

namespace detail {
inline SsVisRbmParams ssvis_stats(const SpikeSlabState& st, std::span<const double> g_e, const SsVisRbmParams& p,
                                  const ConvGeometry& geom) {
  SsVisRbmParams grad = zeros_like(p);
  std::vector<double> neg_g(g_e.size());
  for (std::size_t j = 0; j < g_e.size(); ++j) neg_g[j] = -g_e[j];
  conv_kernel_grad(gated(st), neg_g, geom, grad.U);
  const std::size_t per = geom.out_size * geom.out_size;
  for (std::size_t j = 0; j < g_e.size(); ++j) grad.rho[j / per] -= g_e[j];
  for (std::size_t i = 0; i < st.h.size(); ++i) {
    const std::size_t c = map_of(geom, i);
    const double a = p.alpha[c], m = p.mu[c], s = st.s[i], h = st.h[i];
    grad.alpha[c] += 0.5 * s * s - m * s * h;
    grad.mu[c] -= a * s * h;
    grad.b[c] -= h;
    if (p.bias_shift) {
      grad.alpha[c] += 0.5 * m * m * h;
      grad.mu[c] += a * m * h;
    }
  }
  return grad;
}
}  // namespace detail

/// dE/dtheta at (s, h, g).
inline SsVisRbmParams energy_grad_stats2(const SpikeSlabState& st, std::span<const double> g,
                                         const SsVisRbmParams& p) {
  const ConvGeometry geom = p.geometry_for(st.h.size());
  detail::check_visible2(st, geom);
  if (g.size() != geom.num_outputs()) throw DimensionError("g does not match second-layer geometry");
  return detail::ssvis_stats(st, g, p, geom);
}

/// E_{g|s,h}[dE/dtheta] = dF2(s,h)/dtheta.
inline SsVisRbmParams visible_grad_stats2(const SpikeSlabState& st, const SsVisRbmParams& p) {
  const ConvGeometry geom = p.geometry_for(st.h.size());
  std::vector<double> ge = g_logits(st, p);
  for (auto& x : ge) x = sigmoid(x);
  return detail::ssvis_stats(st, ge, p, geom);
}

/// Convolutional binary-binary RBM used as the third layer.
struct BinaryRbmParams {
  std::size_t input_maps = 0;
  std::size_t kernel = 2;
  std::size_t filters = 0;
  std::vector<double> W;      // [filter][input map][row][col]
  std::vector<double> vbias;  // per input map
  std::vector<double> hbias;  // per filter

  ConvGeometry geometry(std::size_t map_size) const {
    return build_conv_geometry(input_maps, map_size, kernel, filters);
  }
  ConvGeometry geometry_for(std::size_t visible_units) const {
    return geometry(detail::map_side(visible_units, input_maps));
  }

  template <class Fn>
  void visit(Fn&& fn) {
    fn(std::string_view("W"), std::span<double>(W));
    fn(std::string_view("vbias"), std::span<double>(vbias));
    fn(std::string_view("hbias"), std::span<double>(hbias));
  }
  template <class Fn>
  void visit(Fn&& fn) const {
    fn(std::string_view("W"), std::span<const double>(W));
    fn(std::string_view("vbias"), std::span<const double>(vbias));
    fn(std::string_view("hbias"), std::span<const double>(hbias));
  }

  bool operator==(const BinaryRbmParams&) const = default;
};

inline BinaryRbmParams make_brbm_params(std::size_t input_maps, std::size_t kernel, std::size_t filters) {
  BinaryRbmParams p;
  p.input_maps = input_maps;
  p.kernel = kernel;
  p.filters = filters;
  p.W.assign(filters * input_maps * kernel * kernel, 0.0);
  p.vbias.assign(input_maps, 0.0);
  p.hbias.assign(filters, 0.0);
  return p;
}

inline BinaryRbmParams init_brbm_params(std::size_t input_maps, std::size_t kernel, std::size_t filters, Rng& rng,
                                        double weight_std = 0.01) {
  BinaryRbmParams p = make_brbm_params(input_maps, kernel, filters);
  std::normal_distribution<double> normal(0.0, weight_std);
  for (auto& w : p.W) w = normal(rng);
  return p;
}

inline void apply_constraints(BinaryRbmParams&, const SsRbmConstraints& = {}) {}

inline std::vector<double> brbm_h_logits(std::span<const double> v, const BinaryRbmParams& p) {
  const ConvGeometry g = p.geometry_for(v.size());
  std::vector<double> out = conv_forward(v, p.W, g);
  const std::size_t per = g.out_size * g.out_size;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += p.hbias[j / per];
  return out;
}

inline std::vector<double> brbm_h_activation(std::span<const double> v, const BinaryRbmParams& p) {
  std::vector<double> out = brbm_h_logits(v, p);
  for (auto& x : out) x = sigmoid(std::clamp(x, -kLogitClamp, kLogitClamp));
  return out;
}

inline std::vector<double> brbm_v_activation(std::span<const double> h, const BinaryRbmParams& p,
                                             const ConvGeometry& g) {
  std::vector<double> out = conv_adjoint(h, p.W, g);
  const std::size_t per = g.map_size * g.map_size;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = sigmoid(std::clamp(out[i] + p.vbias[i / per], -kLogitClamp, kLogitClamp));
  }
  return out;
}

inline double brbm_energy(std::span<const double> v, std::span<const double> h, const BinaryRbmParams& p) {
  const ConvGeometry g = p.geometry_for(v.size());
  if (h.size() != g.num_outputs()) throw DimensionError("hidden vector does not match geometry");
  const std::vector<double> x = brbm_h_logits(v, p);
  double e = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j) e -= h[j] * x[j];
  const std::size_t per = g.map_size * g.map_size;
  for (std::size_t i = 0; i < v.size(); ++i) e -= p.vbias[i / per] * v[i];
  return e;
}

inline double brbm_free_energy(std::span<const double> v, const BinaryRbmParams& p) {
  const ConvGeometry g = p.geometry_for(v.size());
  const std::size_t per = g.map_size * g.map_size;
  double f = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) f -= p.vbias[i / per] * v[i];
  for (double x : brbm_h_logits(v, p)) f -= softplus(x);
  return f;
}

struct BinarySweep {
  std::vector<double> h;
  std::vector<double> v;
};

inline BinarySweep brbm_gibbs_sweep(std::span<const double> v, const BinaryRbmParams& p, Rng& rng) {
  const ConvGeometry g = p.geometry_for(v.size());
  BinarySweep out;
  out.h = sample_bernoulli(brbm_h_activation(v, p), rng);
  out.v = sample_bernoulli(brbm_v_activation(out.h, p, g), rng);
  return out;
}

/// dE/dtheta at (v, h_e); h_e may hold probabilities.
inline BinaryRbmParams brbm_grad_stats(std::span<const double> v, std::span<const double> h_e,
                                       const BinaryRbmParams& p) {
  const ConvGeometry g = p.geometry_for(v.size());
  if (h_e.size() != g.num_outputs()) throw DimensionError("hidden vector does not match geometry");
  BinaryRbmParams grad = zeros_like(p);
  std::vector<double> neg(h_e.size());
  for (std::size_t j = 0; j < h_e.size(); ++j) neg[j] = -h_e[j];
  conv_kernel_grad(v, neg, g, grad.W);
  const std::size_t per_in = g.map_size * g.map_size;
  for (std::size_t i = 0; i < v.size(); ++i) grad.vbias[i / per_in] -= v[i];
  const std::size_t per_out = g.out_size * g.out_size;
  for (std::size_t j = 0; j < h_e.size(); ++j) grad.hbias[j / per_out] -= h_e[j];
  return grad;
}

}  // namespace tssrbm
