#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "params.hpp"
#include "random.hpp"

namespace tssrbm {

/// First-layer spike-and-slab RBM with diagonal tiled weight sharing.
///
/// All per-unit quantities are tied per filter (tiling t, filter f), so one
/// parameter set serves any image size admitted by the tiling. The visible
/// precision is lambda * I; phi[q] adds phi[q] * h_i to the precision of every
/// pixel inside the receptive field of each unit i of filter q.
struct SsRbmParams {
  std::size_t kernel = 11;
  std::size_t num_tilings = 11;
  std::size_t filters_per_tiling = 32;
  std::vector<double> W;      // [filter][row][col], filter = t * F + f
  std::vector<double> b;      // spike bias
  std::vector<double> mu;     // slab mean
  std::vector<double> alpha;  // slab precision
  std::vector<double> phi;    // h-gated visible precision
  double lambda = 1.0;        // visible precision

  std::size_t num_filters() const { return num_tilings * filters_per_tiling; }

  TiledGeometry geometry(std::size_t image_size) const {
    return build_tiled_geometry(image_size, image_size, kernel, num_tilings, filters_per_tiling);
  }

  template <class Fn>
  void visit(Fn&& fn) {
    fn(std::string_view("W"), std::span<double>(W));
    fn(std::string_view("b"), std::span<double>(b));
    fn(std::string_view("mu"), std::span<double>(mu));
    fn(std::string_view("alpha"), std::span<double>(alpha));
    fn(std::string_view("phi"), std::span<double>(phi));
    fn(std::string_view("lambda"), std::span<double>(&lambda, 1));
  }
  template <class Fn>
  void visit(Fn&& fn) const {
    fn(std::string_view("W"), std::span<const double>(W));
    fn(std::string_view("b"), std::span<const double>(b));
    fn(std::string_view("mu"), std::span<const double>(mu));
    fn(std::string_view("alpha"), std::span<const double>(alpha));
    fn(std::string_view("phi"), std::span<const double>(phi));
    fn(std::string_view("lambda"), std::span<const double>(&lambda, 1));
  }

  bool operator==(const SsRbmParams&) const = default;
};

/// Neutral parameters: W = 0, b = 0, mu = 0, alpha = 1, phi = 0, lambda = 1.
inline SsRbmParams make_ssrbm_params(std::size_t kernel, std::size_t tilings, std::size_t filters) {
  SsRbmParams p;
  p.kernel = kernel;
  p.num_tilings = tilings;
  p.filters_per_tiling = filters;
  const std::size_t q = p.num_filters();
  p.W.assign(q * kernel * kernel, 0.0);
  p.b.assign(q, 0.0);
  p.mu.assign(q, 0.0);
  p.alpha.assign(q, 1.0);
  p.phi.assign(q, 0.0);
  p.lambda = 1.0;
  return p;
}

struct SsRbmInit {
  double weight_std = 0.01;
  double spike_bias = -1.0;
  double slab_mean = 0.0;
  double slab_precision = 1.0;
  double visible_precision = 1.0;
  double gated_precision = 0.0;
};

inline SsRbmParams init_ssrbm_params(std::size_t kernel, std::size_t tilings, std::size_t filters,
                                     Rng& rng, const SsRbmInit& init = {}) {
  SsRbmParams p = make_ssrbm_params(kernel, tilings, filters);
  std::normal_distribution<double> normal(0.0, init.weight_std);
  for (auto& w : p.W) w = normal(rng);
  std::fill(p.b.begin(), p.b.end(), init.spike_bias);
  std::fill(p.mu.begin(), p.mu.end(), init.slab_mean);
  std::fill(p.alpha.begin(), p.alpha.end(), init.slab_precision);
  std::fill(p.phi.begin(), p.phi.end(), init.gated_precision);
  p.lambda = init.visible_precision;
  return p;
}

struct SsRbmConstraints {
  double alpha_min = 1e-2;
  double lambda_min = 1e-2;
  bool proper = true;  // shrink filters so the slab-marginal precision stays positive definite
};

/// Largest ||W_i||^2 the properness guard allows. Any pixel lies under at
/// most T*F fields, so ||W_i||^2 / alpha_i < phi_i + lambda / (T*F) for every
/// filter keeps Lambda + sum_i h_i (Phi_i - W_i W_i^T / alpha_i) positive
/// definite for all h.
inline double filter_norm_cap(const SsRbmParams& p, std::size_t i) {
  return p.alpha[i] * (p.phi[i] + p.lambda / static_cast<double>(p.num_filters())) * (1.0 - 1e-6);
}

/// Clips alpha and lambda to their minima and phi to be non-negative, then
/// rescales any filter above its properness cap.
inline void apply_constraints(SsRbmParams& p, const SsRbmConstraints& c = {}) {
  for (auto& a : p.alpha) a = std::max(a, c.alpha_min);
  for (auto& f : p.phi) f = std::max(f, 0.0);
  p.lambda = std::max(p.lambda, c.lambda_min);
  if (!c.proper) return;
  const std::size_t kk = p.kernel * p.kernel;
  for (std::size_t i = 0; i < p.num_filters(); ++i) {
    const std::span<double> w(p.W.data() + i * kk, kk);
    double n2 = 0.0;
    for (double x : w) n2 += x * x;
    const double cap = filter_norm_cap(p, i);
    if (n2 > cap) {
      const double f = std::sqrt(cap / n2);
      for (auto& x : w) x *= f;
    }
  }
}

struct SpikeSlabState {
  std::vector<double> h;
  std::vector<double> s;
  bool operator==(const SpikeSlabState&) const = default;
};

/// Activation arguments are clamped to this range before the sigmoid.
inline constexpr double kLogitClamp = 30.0;

/// Quantities of a visible configuration shared by all conditionals.
struct VisibleTerms {
  TiledGeometry geom;
  std::vector<double> proj;      // v^T W_i per unit
  std::vector<double> field_sq;  // |v|^2 over each receptive field
  double sq_norm = 0.0;
};

inline VisibleTerms visible_terms(const Grid& v, const SsRbmParams& p) {
  if (v.rows != v.cols) throw DimensionError("visible grid must be square");
  VisibleTerms t;
  t.geom = p.geometry(v.rows);
  if (p.W.size() != t.geom.num_filters() * p.kernel * p.kernel) {
    throw DimensionError("parameter arrays do not match the declared filter layout");
  }
  t.proj = tiled_forward(v, p.W, t.geom);
  t.field_sq = field_squared_norms(v, t.geom);
  t.sq_norm = squared_norm(v.data);
  return t;
}

namespace detail {

inline std::size_t filter_of(const TiledGeometry& g, std::size_t unit) {
  return unit / (g.positions * g.positions);
}

inline std::size_t field_of(const TiledGeometry& g, std::size_t unit) {
  const std::size_t per_map = g.positions * g.positions;
  const std::size_t t = unit / per_map / g.filters_per_tiling;
  return t * per_map + unit % per_map;
}

inline void check_units(std::span<const double> x, const TiledGeometry& g) {
  if (x.size() != g.num_units()) throw DimensionError("per-unit vector length != unit count");
}

}  // namespace detail

/// Unclamped argument of the spike conditional:
/// 1/2 alpha^-1 (v^T W_i)^2 + v^T W_i mu_i - 1/2 v^T Phi_i v + b_i.
inline std::vector<double> spike_logits(const VisibleTerms& t, const SsRbmParams& p) {
  std::vector<double> out(t.proj.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t q = detail::filter_of(t.geom, i);
    const double x = t.proj[i];
    out[i] = 0.5 * x * x / p.alpha[q] + x * p.mu[q] - 0.5 * p.phi[q] * t.field_sq[detail::field_of(t.geom, i)] +
             p.b[q];
  }
  return out;
}

/// P(h_i = 1 | v) for every unit.
inline std::vector<double> spike_activation(const VisibleTerms& t, const SsRbmParams& p) {
  std::vector<double> out = spike_logits(t, p);
  for (auto& x : out) x = sigmoid(std::clamp(x, -kLogitClamp, kLogitClamp));
  return out;
}

inline std::vector<double> spike_activation(const Grid& v, const SsRbmParams& p) {
  return spike_activation(visible_terms(v, p), p);
}

inline std::vector<double> sample_bernoulli(std::span<const double> prob, Rng& rng) {
  std::vector<double> out(prob.size());
  for (std::size_t i = 0; i < prob.size(); ++i) out[i] = bernoulli(prob[i], rng);
  return out;
}

inline std::vector<double> sample_h_given_v(const Grid& v, const SsRbmParams& p, Rng& rng) {
  return sample_bernoulli(spike_activation(v, p), rng);
}

/// E[s | v, h] = (alpha^-1 v^T W_i + mu_i) h_i.
inline std::vector<double> slab_mean(const VisibleTerms& t, std::span<const double> h, const SsRbmParams& p) {
  detail::check_units(h, t.geom);
  std::vector<double> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const std::size_t q = detail::filter_of(t.geom, i);
    out[i] = (t.proj[i] / p.alpha[q] + p.mu[q]) * h[i];
  }
  return out;
}

inline std::vector<double> slab_mean(const Grid& v, std::span<const double> h, const SsRbmParams& p) {
  return slab_mean(visible_terms(v, p), h, p);
}

inline std::vector<double> sample_s_given_vh(const VisibleTerms& t, std::span<const double> h,
                                             const SsRbmParams& p, Rng& rng) {
  std::vector<double> s = slab_mean(t, h, p);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] += normal(rng) / std::sqrt(p.alpha[detail::filter_of(t.geom, i)]);
  }
  return s;
}

inline std::vector<double> sample_s_given_vh(const Grid& v, std::span<const double> h, const SsRbmParams& p,
                                             Rng& rng) {
  return sample_s_given_vh(visible_terms(v, p), h, p, rng);
}

/// Diagonal of Lambda + sum_i Phi_i h_i as an image.
inline Grid visible_precision(std::span<const double> h, const SsRbmParams& p, const TiledGeometry& g) {
  detail::check_units(h, g);
  std::vector<double> per_field(g.num_fields(), 0.0);
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double phi = p.phi[detail::filter_of(g, i)];
    if (phi != 0.0 && h[i] != 0.0) per_field[detail::field_of(g, i)] += phi * h[i];
  }
  Grid prec(g.height, g.width, p.lambda);
  add_to_fields(per_field, g, prec);
  for (double x : prec.data) {
    if (!(x > 0.0)) throw NumericalError("visible conditional precision is not positive");
  }
  return prec;
}

/// Mean of p(v | s, h): C sum_i W_i s_i h_i with C the inverse of visible_precision.
inline Grid visible_mean(const SpikeSlabState& st, const SsRbmParams& p, const TiledGeometry& g) {
  detail::check_units(st.h, g);
  detail::check_units(st.s, g);
  std::vector<double> sh(st.h.size());
  for (std::size_t i = 0; i < sh.size(); ++i) sh[i] = st.s[i] * st.h[i];
  Grid mean = tiled_adjoint(sh, p.W, g);
  const Grid prec = visible_precision(st.h, p, g);
  for (std::size_t j = 0; j < mean.size(); ++j) mean.data[j] /= prec.data[j];
  return mean;
}

inline Grid sample_v_given_sh(const SpikeSlabState& st, const SsRbmParams& p, const TiledGeometry& g,
                              Rng& rng) {
  detail::check_units(st.h, g);
  detail::check_units(st.s, g);
  std::vector<double> sh(st.h.size());
  for (std::size_t i = 0; i < sh.size(); ++i) sh[i] = st.s[i] * st.h[i];
  Grid v = tiled_adjoint(sh, p.W, g);
  const Grid prec = visible_precision(st.h, p, g);
  std::normal_distribution<double> normal;
  for (std::size_t j = 0; j < v.size(); ++j) {
    v.data[j] = v.data[j] / prec.data[j] + normal(rng) / std::sqrt(prec.data[j]);
  }
  for (double x : v.data) {
    if (!std::isfinite(x)) throw NumericalError("visible sample is not finite");
  }
  return v;
}

struct GibbsStep {
  std::vector<double> h;
  std::vector<double> s;
  Grid v;
};

/// One block sweep h ~ P(h|v), s ~ p(s|v,h), v ~ p(v|s,h).
inline GibbsStep gibbs_sweep(const Grid& v, const SsRbmParams& p, Rng& rng) {
  const VisibleTerms t = visible_terms(v, p);
  GibbsStep out;
  out.h = sample_bernoulli(spike_activation(t, p), rng);
  out.s = sample_s_given_vh(t, out.h, p, rng);
  SpikeSlabState st{out.h, out.s};
  out.v = sample_v_given_sh(st, p, t.geom, rng);
  return out;
}

inline double energy(const Grid& v, const SpikeSlabState& st, const SsRbmParams& p) {
  const VisibleTerms t = visible_terms(v, p);
  detail::check_units(st.h, t.geom);
  detail::check_units(st.s, t.geom);
  double e = 0.5 * p.lambda * t.sq_norm;
  for (std::size_t i = 0; i < st.h.size(); ++i) {
    const std::size_t q = detail::filter_of(t.geom, i);
    const double h = st.h[i];
    const double s = st.s[i];
    e += -t.proj[i] * s * h + 0.5 * p.phi[q] * h * t.field_sq[detail::field_of(t.geom, i)] +
         0.5 * p.alpha[q] * s * s - p.alpha[q] * p.mu[q] * s * h - p.b[q] * h +
         0.5 * p.alpha[q] * p.mu[q] * p.mu[q] * h;
  }
  return e;
}

/// F(v) = -log sum_h int exp(-E(v,s,h)) ds. Exact, so p(v) = exp(-F(v)) / Z.
inline double free_energy(const VisibleTerms& t, const SsRbmParams& p) {
  const std::vector<double> logits = spike_logits(t, p);
  double f = 0.5 * p.lambda * t.sq_norm;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double a = p.alpha[detail::filter_of(t.geom, i)];
    f -= softplus(logits[i]) + 0.5 * std::log(2.0 * std::numbers::pi / a);
  }
  return f;
}

inline double free_energy(const Grid& v, const SsRbmParams& p) { return free_energy(visible_terms(v, p), p); }

namespace detail {

/// Adds the expectation of dE/dtheta given E[h], E[s h] and E[s^2] per unit.
inline void accumulate_ssrbm_stats(const Grid& v, const VisibleTerms& t, std::span<const double> h_e,
                                   std::span<const double> sh_e, std::span<const double> ss_e,
                                   const SsRbmParams& p, SsRbmParams& grad) {
  std::vector<double> neg_sh(sh_e.size());
  for (std::size_t i = 0; i < sh_e.size(); ++i) neg_sh[i] = -sh_e[i];
  tiled_kernel_grad(v, neg_sh, t.geom, grad.W);
  for (std::size_t i = 0; i < h_e.size(); ++i) {
    const std::size_t q = filter_of(t.geom, i);
    const double a = p.alpha[q];
    const double m = p.mu[q];
    grad.b[q] -= h_e[i];
    grad.mu[q] += a * (m * h_e[i] - sh_e[i]);
    grad.alpha[q] += 0.5 * ss_e[i] - m * sh_e[i] + 0.5 * m * m * h_e[i];
    grad.phi[q] += 0.5 * h_e[i] * t.field_sq[field_of(t.geom, i)];
  }
  grad.lambda += 0.5 * t.sq_norm;
}

}  // namespace detail

/// dE/dtheta at (v, s, h), summed over every tied position.
inline SsRbmParams energy_grad_stats(const Grid& v, const SpikeSlabState& st, const SsRbmParams& p) {
  const VisibleTerms t = visible_terms(v, p);
  detail::check_units(st.h, t.geom);
  detail::check_units(st.s, t.geom);
  std::vector<double> sh(st.h.size()), ss(st.h.size());
  for (std::size_t i = 0; i < sh.size(); ++i) {
    sh[i] = st.s[i] * st.h[i];
    ss[i] = st.s[i] * st.s[i];
  }
  SsRbmParams grad = zeros_like(p);
  detail::accumulate_ssrbm_stats(v, t, st.h, sh, ss, p, grad);
  return grad;
}

/// E_{s|v,h}[dE/dtheta]: the slab is integrated out analytically.
inline SsRbmParams rb_grad_stats(const VisibleTerms& t, const Grid& v, std::span<const double> h,
                                 const SsRbmParams& p) {
  detail::check_units(h, t.geom);
  std::vector<double> sh(h.size()), ss(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const std::size_t q = detail::filter_of(t.geom, i);
    const double m = (t.proj[i] / p.alpha[q] + p.mu[q]) * h[i];
    sh[i] = m * h[i];
    ss[i] = m * m + 1.0 / p.alpha[q];
  }
  SsRbmParams grad = zeros_like(p);
  detail::accumulate_ssrbm_stats(v, t, h, sh, ss, p, grad);
  return grad;
}

inline SsRbmParams rb_grad_stats(const Grid& v, std::span<const double> h, const SsRbmParams& p) {
  return rb_grad_stats(visible_terms(v, p), v, h, p);
}

/// E_{h,s|v}[dE/dtheta] = dF(v)/dtheta.
inline SsRbmParams free_energy_grad(const Grid& v, const SsRbmParams& p) {
  const VisibleTerms t = visible_terms(v, p);
  const std::vector<double> logits = spike_logits(t, p);
  std::vector<double> he(logits.size()), sh(logits.size()), ss(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const std::size_t q = detail::filter_of(t.geom, i);
    const double prob = sigmoid(logits[i]);
    const double m = t.proj[i] / p.alpha[q] + p.mu[q];
    he[i] = prob;
    sh[i] = prob * m;
    ss[i] = prob * m * m + 1.0 / p.alpha[q];
  }
  SsRbmParams grad = zeros_like(p);
  detail::accumulate_ssrbm_stats(v, t, he, sh, ss, p, grad);
  return grad;
}

/// Deterministic one-step reconstruction: the visible mean given
/// h = P(h|v) and s = E[s | v, h = 1].
inline Grid reconstruct_mean(const Grid& v, const SsRbmParams& p) {
  const VisibleTerms t = visible_terms(v, p);
  SpikeSlabState st;
  st.h = spike_activation(t, p);
  st.s.resize(st.h.size());
  for (std::size_t i = 0; i < st.h.size(); ++i) {
    const std::size_t q = detail::filter_of(t.geom, i);
    st.s[i] = t.proj[i] / p.alpha[q] + p.mu[q];
  }
  return visible_mean(st, p, t.geom);
}

}  // namespace tssrbm
