#pragma once

// Stochastic maximum-likelihood training: CD-k, PCD and FPCD over any of the
// three layer types. Parameters ascend E_model[dE/dtheta] - E_data[dE/dtheta].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "params.hpp"
#include "random.hpp"
#include "ssrbm.hpp"
#include "upper.hpp"

namespace tssrbm {

enum class Algorithm { cd, pcd, fpcd };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::cd: return "cd";
    case Algorithm::pcd: return "pcd";
    case Algorithm::fpcd: return "fpcd";
  }
  return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l == "cd") return Algorithm::cd;
  if (l == "pcd") return Algorithm::pcd;
  if (l == "fpcd") return Algorithm::fpcd;
  throw ConfigError("unknown training algorithm '" + s + "'");
}

struct TrainConfig {
  Algorithm algorithm = Algorithm::fpcd;
  std::size_t k = 1;
  double learning_rate = 1e-3;
  std::size_t lr_warm = 2000;  // 1/t decay starts after this many updates; 0 disables
  double momentum = 0.0;
  std::size_t minibatch = 64;
  std::size_t n_chains = 64;
  double restart_prob = 0.01;
  double fast_rate = -1.0;  // negative means "same as learning_rate"
  double fast_decay = 0.95;
  std::size_t updates = 20000;
  std::size_t updates_per_epoch = 100;
  std::uint64_t seed = 1;
  bool site_average = true;  // divide each shared parameter's gradient by its number of sites
  SsRbmConstraints constraints;

  double effective_fast_rate() const { return fast_rate < 0.0 ? learning_rate : fast_rate; }

  double rate_at(std::size_t step) const {
    if (lr_warm == 0 || step <= lr_warm) return learning_rate;
    return learning_rate * static_cast<double>(lr_warm) / static_cast<double>(step);
  }

  void validate() const {
    if (k < 1) throw ConfigError("k must be at least 1");
    if (!(restart_prob >= 0.0 && restart_prob <= 1.0)) throw ConfigError("restart_prob must lie in [0, 1]");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(fast_decay >= 0.0 && fast_decay <= 1.0)) throw ConfigError("fast_decay must lie in [0, 1]");
    if (minibatch < 1) throw ConfigError("minibatch must be at least 1");
    if (n_chains < 1) throw ConfigError("n_chains must be at least 1");
    if (updates_per_epoch < 1) throw ConfigError("updates_per_epoch must be at least 1");
  }
};

/// Per-layer hooks used by the generic trainer.
template <class P>
struct LayerTraits;

template <>
struct LayerTraits<SsRbmParams> {
  using Sample = Grid;

  /// Sampled spikes with the slab integrated out.
  static SsRbmParams data_stats(const Grid& v, const SsRbmParams& p, Rng& rng) {
    const VisibleTerms t = visible_terms(v, p);
    const std::vector<double> h = sample_bernoulli(spike_activation(t, p), rng);
    return rb_grad_stats(t, v, h, p);
  }
  static SsRbmParams model_stats(const Grid& v, const SsRbmParams& p) { return free_energy_grad(v, p); }
  static Grid sweep(const Grid& v, const SsRbmParams& p, Rng& rng) { return gibbs_sweep(v, p, rng).v; }
  static Grid noise(const Grid& like, const SsRbmParams&, Rng& rng) {
    std::normal_distribution<double> normal;
    Grid out(like.rows, like.cols);
    for (auto& x : out.data) x = normal(rng);
    return out;
  }
  static double free_energy(const Grid& v, const SsRbmParams& p) { return tssrbm::free_energy(v, p); }
  static double recon_error(const Grid& v, const SsRbmParams& p) {
    const Grid r = reconstruct_mean(v, p);
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) acc += (v.data[i] - r.data[i]) * (v.data[i] - r.data[i]);
    return acc / static_cast<double>(v.size());
  }
  static void constrain(SsRbmParams& p, const SsRbmConstraints& c) { apply_constraints(p, c); }
  static void per_site(SsRbmParams& d, const Grid& like) {
    const std::size_t m = d.geometry(like.rows).positions;
    d.visit([&](std::string_view name, std::span<double> a) {
      const double n = name == "lambda" ? static_cast<double>(like.size()) : static_cast<double>(m * m);
      for (auto& x : a) x /= n;
    });
  }
};

template <>
struct LayerTraits<SsVisRbmParams> {
  using Sample = SpikeSlabState;

  static SsVisRbmParams data_stats(const SpikeSlabState& x, const SsVisRbmParams& p, Rng&) {
    return visible_grad_stats2(x, p);
  }
  static SsVisRbmParams model_stats(const SpikeSlabState& x, const SsVisRbmParams& p) {
    return visible_grad_stats2(x, p);
  }
  static SpikeSlabState sweep(const SpikeSlabState& x, const SsVisRbmParams& p, Rng& rng) {
    UpperSweep s = gibbs_sweep2(x, p, rng);
    return {std::move(s.h), std::move(s.s)};
  }
  static SpikeSlabState noise(const SpikeSlabState& like, const SsVisRbmParams& p, Rng& rng) {
    const ConvGeometry geom = p.geometry_for(like.h.size());
    std::normal_distribution<double> normal;
    SpikeSlabState out{std::vector<double>(like.h.size()), std::vector<double>(like.h.size())};
    for (std::size_t i = 0; i < out.h.size(); ++i) {
      const std::size_t c = i / (geom.map_size * geom.map_size);
      out.h[i] = bernoulli(0.5, rng);
      out.s[i] = p.mu[c] * out.h[i] + normal(rng) / std::sqrt(p.alpha[c]);
    }
    return out;
  }
  static double free_energy(const SpikeSlabState& x, const SsVisRbmParams& p) { return free_energy2(x, p); }
  /// Mean squared error of the spike probabilities after a mean-field round trip.
  static double recon_error(const SpikeSlabState& x, const SsVisRbmParams& p) {
    const ConvGeometry geom = p.geometry_for(x.h.size());
    const std::vector<double> g = g_activation(x, p);
    const std::vector<double> h = h_activation_given_g(g, p, geom);
    double acc = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) acc += (x.h[i] - h[i]) * (x.h[i] - h[i]);
    return acc / static_cast<double>(h.size());
  }
  static void constrain(SsVisRbmParams& p, const SsRbmConstraints& c) { apply_constraints(p, c); }
  static void per_site(SsVisRbmParams& d, const SpikeSlabState& like) {
    const ConvGeometry g = d.geometry_for(like.h.size());
    d.visit([&](std::string_view name, std::span<double> a) {
      const std::size_t side = (name == "U" || name == "rho") ? g.out_size : g.map_size;
      for (auto& x : a) x /= static_cast<double>(side * side);
    });
  }
};

template <>
struct LayerTraits<BinaryRbmParams> {
  using Sample = std::vector<double>;

  static BinaryRbmParams data_stats(const Sample& v, const BinaryRbmParams& p, Rng&) {
    return brbm_grad_stats(v, brbm_h_activation(v, p), p);
  }
  static BinaryRbmParams model_stats(const Sample& v, const BinaryRbmParams& p) {
    return brbm_grad_stats(v, brbm_h_activation(v, p), p);
  }
  static Sample sweep(const Sample& v, const BinaryRbmParams& p, Rng& rng) { return brbm_gibbs_sweep(v, p, rng).v; }
  static Sample noise(const Sample& like, const BinaryRbmParams&, Rng& rng) {
    Sample out(like.size());
    for (auto& x : out) x = bernoulli(0.5, rng);
    return out;
  }
  static double free_energy(const Sample& v, const BinaryRbmParams& p) { return brbm_free_energy(v, p); }
  static double recon_error(const Sample& v, const BinaryRbmParams& p) {
    const std::vector<double> r = brbm_v_activation(brbm_h_activation(v, p), p, p.geometry_for(v.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) acc += (v[i] - r[i]) * (v[i] - r[i]);
    return acc / static_cast<double>(v.size());
  }
  static void constrain(BinaryRbmParams& p, const SsRbmConstraints& c) { apply_constraints(p, c); }
  static void per_site(BinaryRbmParams& d, const Sample& like) {
    const ConvGeometry g = d.geometry_for(like.size());
    d.visit([&](std::string_view name, std::span<double> a) {
      const std::size_t side = name == "vbias" ? g.map_size : g.out_size;
      for (auto& x : a) x /= static_cast<double>(side * side);
    });
  }
};

template <class P>
using SampleOf = typename LayerTraits<P>::Sample;

/// Persistent negative-phase chains. `fast` stays zero unless FPCD is used.
template <class P>
struct ChainPool {
  std::vector<SampleOf<P>> chains;
  std::vector<Rng> rngs;
  P fast;
};

template <class P>
struct TrainState {
  P params;
  P velocity;
  ChainPool<P> pool;
  std::size_t step = 0;
};

/// Fresh state: zero velocity and noise-initialized chains shaped like `like`.
template <class P>
TrainState<P> make_train_state(const P& params, const SampleOf<P>& like, const TrainConfig& cfg) {
  cfg.validate();
  TrainState<P> st{params, zeros_like(params), {}, 0};
  st.pool.fast = zeros_like(params);
  for (std::size_t c = 0; c < cfg.n_chains; ++c) {
    st.pool.rngs.push_back(make_stream(cfg.seed, Stream::chains, c));
    st.pool.chains.push_back(LayerTraits<P>::noise(like, params, st.pool.rngs.back()));
  }
  return st;
}

namespace detail {

template <class P>
P reduce_mean(const std::vector<P>& parts) {
  P acc = zeros_like(parts.front());
  for (const P& x : parts) axpy(acc, 1.0, x);
  scale(acc, 1.0 / static_cast<double>(parts.size()));
  return acc;
}

template <class P>
P data_phase(const std::vector<SampleOf<P>>& batch, const P& params, Rng& rng) {
  if (batch.empty()) throw ConfigError("empty minibatch");
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < batch.size(); ++i) rngs.emplace_back(rng());
  std::vector<P> parts(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) { parts[i] = LayerTraits<P>::data_stats(batch[i], params, rngs[i]); });
  return reduce_mean(parts);
}

template <class P>
P model_phase(const std::vector<SampleOf<P>>& samples, const P& params) {
  std::vector<P> parts(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) { parts[i] = LayerTraits<P>::model_stats(samples[i], params); });
  return reduce_mean(parts);
}

template <class P>
void site_scale(P& direction, const SampleOf<P>& like, const TrainConfig& cfg) {
  if (cfg.site_average) LayerTraits<P>::per_site(direction, like);
}

template <class P>
void apply_step(TrainState<P>& st, const P& direction, const TrainConfig& cfg) {
  ++st.step;
  const double lr = cfg.rate_at(st.step);
  if (cfg.momentum > 0.0) {
    scale(st.velocity, cfg.momentum);
    axpy(st.velocity, lr, direction);
    axpy(st.params, 1.0, st.velocity);
  } else {
    axpy(st.params, lr, direction);
  }
  LayerTraits<P>::constrain(st.params, cfg.constraints);
}

/// Advances every persistent chain by k sweeps under `driver`, after an
/// independent restart draw per chain.
template <class P>
void advance_pool(ChainPool<P>& pool, const P& driver, const TrainConfig& cfg) {
  parallel_for(pool.chains.size(), [&](std::size_t c) {
    Rng& r = pool.rngs[c];
    if (cfg.restart_prob > 0.0 && uniform01(r) < cfg.restart_prob) {
      pool.chains[c] = LayerTraits<P>::noise(pool.chains[c], driver, r);
    }
    for (std::size_t s = 0; s < cfg.k; ++s) pool.chains[c] = LayerTraits<P>::sweep(pool.chains[c], driver, r);
  });
}

}  // namespace detail

/// CD-k direction: chains start at the data and run k sweeps.
template <class P>
P cd_direction(const std::vector<SampleOf<P>>& batch, const P& params, std::size_t k, Rng& rng) {
  const P positive = detail::data_phase(batch, params, rng);
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < batch.size(); ++i) rngs.emplace_back(rng());
  std::vector<SampleOf<P>> neg(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    SampleOf<P> x = batch[i];
    for (std::size_t s = 0; s < k; ++s) x = LayerTraits<P>::sweep(x, params, rngs[i]);
    neg[i] = std::move(x);
  });
  P dir = detail::model_phase(neg, params);
  axpy(dir, -1.0, positive);
  return dir;
}

template <class P>
void cd_update(const std::vector<SampleOf<P>>& batch, TrainState<P>& st, const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  P dir = cd_direction(batch, st.params, cfg.k, rng);
  detail::site_scale(dir, batch.front(), cfg);
  detail::apply_step(st, dir, cfg);
}

template <class P>
void pcd_update(const std::vector<SampleOf<P>>& batch, TrainState<P>& st, const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (st.pool.chains.empty()) throw ConfigError("persistent chain pool is empty");
  const P positive = detail::data_phase(batch, st.params, rng);
  detail::advance_pool(st.pool, st.params, cfg);
  P dir = detail::model_phase(st.pool.chains, st.params);
  axpy(dir, -1.0, positive);
  detail::site_scale(dir, batch.front(), cfg);
  detail::apply_step(st, dir, cfg);
}

/// Chains run under slow + fast parameters; the fast copy takes the same
/// direction at fast_rate and shrinks by fast_decay every update.
template <class P>
void fpcd_update(const std::vector<SampleOf<P>>& batch, TrainState<P>& st, const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (st.pool.chains.empty()) throw ConfigError("persistent chain pool is empty");
  const P positive = detail::data_phase(batch, st.params, rng);
  P driver = st.params;
  axpy(driver, 1.0, st.pool.fast);
  LayerTraits<P>::constrain(driver, cfg.constraints);
  detail::advance_pool(st.pool, driver, cfg);
  P dir = detail::model_phase(st.pool.chains, st.params);
  axpy(dir, -1.0, positive);
  detail::site_scale(dir, batch.front(), cfg);
  scale(st.pool.fast, cfg.fast_decay);
  axpy(st.pool.fast, cfg.effective_fast_rate(), dir);
  detail::apply_step(st, dir, cfg);
}

template <class P>
void train_step(const std::vector<SampleOf<P>>& batch, TrainState<P>& st, const TrainConfig& cfg, Rng& rng) {
  switch (cfg.algorithm) {
    case Algorithm::cd: cd_update(batch, st, cfg, rng); break;
    case Algorithm::pcd: pcd_update(batch, st, cfg, rng); break;
    case Algorithm::fpcd: fpcd_update(batch, st, cfg, rng); break;
  }
}

template <class P>
double mean_free_energy(const std::vector<SampleOf<P>>& xs, const P& p) {
  std::vector<double> f(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) { f[i] = LayerTraits<P>::free_energy(xs[i], p); });
  double acc = 0.0;
  for (double x : f) acc += x;
  return xs.empty() ? 0.0 : acc / static_cast<double>(xs.size());
}

template <class P>
double mean_recon_error(const std::vector<SampleOf<P>>& xs, const P& p) {
  std::vector<double> f(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) { f[i] = LayerTraits<P>::recon_error(xs[i], p); });
  double acc = 0.0;
  for (double x : f) acc += x;
  return xs.empty() ? 0.0 : acc / static_cast<double>(xs.size());
}

}  // namespace tssrbm
