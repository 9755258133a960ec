#pragma once

// Deep belief network over a tiled ssRBM: upward inference, top-layer Gibbs
// generation, clamped inpainting and greedy layer-wise training.

#include <chrono>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "errors.hpp"
#include "ssrbm.hpp"
#include "training.hpp"
#include "upper.hpp"

namespace tssrbm {

struct DbnModel {
  SsRbmParams layer1;
  std::optional<SsVisRbmParams> layer2;
  std::optional<BinaryRbmParams> layer3;
  double norm_mean = 0.0;
  double norm_std = 1.0;

  std::size_t depth() const { return layer3 ? 3 : (layer2 ? 2 : 1); }

  void validate() const {
    if (layer3 && !layer2) throw ConfigError("a third layer requires a second layer");
    if (layer2 && layer2->input_maps != layer1.num_filters()) {
      throw DimensionError("second layer input maps do not match first layer filters");
    }
    if (layer3 && layer3->input_maps != layer2->filters) {
      throw DimensionError("third layer input maps do not match second layer filters");
    }
  }

  /// Map side lengths per level for an input of the given size: pixels, h maps, g maps, top maps.
  std::vector<std::size_t> map_sizes(std::size_t image) const {
    validate();
    std::vector<std::size_t> out{image, layer1.geometry(image).positions};
    if (layer2) out.push_back(layer2->geometry(out.back()).out_size);
    if (layer3) out.push_back(layer3->geometry(out.back()).out_size);
    return out;
  }
};

/// Per-layer representations of one image.
struct UpState {
  std::vector<double> q;    // P(h | v)
  std::vector<double> m;    // E[s | v, h-hat]
  std::vector<double> g;    // P(g | m, q), when a second layer exists
  std::vector<double> top;  // third-layer hidden probabilities
};

inline UpState infer_up(const Grid& v, const DbnModel& model, Rng& rng, std::size_t depth = 3) {
  model.validate();
  const VisibleTerms t = visible_terms(v, model.layer1);
  UpState out;
  out.q = spike_activation(t, model.layer1);
  const std::vector<double> h_hat = sample_bernoulli(out.q, rng);
  out.m = slab_mean(t, h_hat, model.layer1);
  if (model.layer2 && depth >= 2) {
    out.g = g_activation({out.q, out.m}, *model.layer2);
    if (model.layer3 && depth >= 3) out.top = brbm_h_activation(out.g, *model.layer3);
  }
  return out;
}

/// Persistent top-layer chain together with its deterministic down-pass.
class DbnChain {
 public:
  DbnChain(const DbnModel& model, std::size_t out_size, Rng& rng) : model_(&model) {
    model.validate();
    geom1_ = model.layer1.geometry(out_size);
    const std::size_t n1 = geom1_.num_units();
    if (model.depth() == 1) {
      v_ = LayerTraits<SsRbmParams>::noise(Grid(out_size, out_size), model.layer1, rng);
      h_.assign(n1, 0.0);
      s_.assign(n1, 0.0);
      return;
    }
    geom2_ = model.layer2->geometry(geom1_.positions);
    const SpikeSlabState like{std::vector<double>(n1), std::vector<double>(n1)};
    const SpikeSlabState st = LayerTraits<SsVisRbmParams>::noise(like, *model.layer2, rng);
    h_ = st.h;
    s_ = st.s;
    h_act_ = st.h;
    if (model.depth() == 3) {
      g_.assign(geom2_.num_outputs(), 0.0);
      for (auto& x : g_) x = bernoulli(0.5, rng);
      lower_from_g(rng);
    }
  }

  /// One sweep of the top-layer block Gibbs sampler (plus the stochastic
  /// h-hat draw at the top interface for a 3-layer stack).
  void step(Rng& rng) {
    switch (model_->depth()) {
      case 1: {
        GibbsStep st = gibbs_sweep(v_, model_->layer1, rng);
        s_ = slab_mean(v_, st.h, model_->layer1);
        h_ = std::move(st.h);
        v_ = std::move(st.v);
        break;
      }
      case 2: {
        UpperSweep sw = gibbs_sweep2({h_, s_}, *model_->layer2, rng);
        g_ = std::move(sw.g);
        h_ = std::move(sw.h);
        h_act_ = std::move(sw.h_activation);
        s_ = std::move(sw.s);
        break;
      }
      default: {
        g_ = brbm_gibbs_sweep(g_, *model_->layer3, rng).v;
        lower_from_g(rng);
        break;
      }
    }
  }

  /// Conditional mean of the visible layer given the current spikes, with
  /// slabs at their expectation.
  Grid visible_mean() const {
    if (model_->depth() == 1) return tssrbm::visible_mean({h_, s_}, model_->layer1, geom1_);
    const std::vector<double> s = slab_mean2(h_, g_, *model_->layer2, geom2_);
    return tssrbm::visible_mean({h_act_, s}, model_->layer1, geom1_);
  }

  const std::vector<double>& spikes() const { return h_; }

 private:
  void lower_from_g(Rng& rng) {
    SpikeDraw d = sample_h_given_g(g_, *model_->layer2, geom2_, rng);
    h_ = std::move(d.h);
    h_act_ = std::move(d.activation);
    s_ = slab_mean2(h_, g_, *model_->layer2, geom2_);
  }

  const DbnModel* model_;
  TiledGeometry geom1_;
  ConvGeometry geom2_;
  Grid v_;
  std::vector<double> h_, h_act_, s_, g_;
};

struct GenerateOptions {
  std::size_t n_samples = 128;
  std::size_t burn_in = 2000;
  std::size_t thin = 50;
  std::size_t out_size = 120;
};

/// One chain: burn_in sweeps, then a sample every `thin` sweeps.
inline std::vector<Grid> generate(const DbnModel& model, const GenerateOptions& opt, Rng& rng) {
  if (opt.burn_in < 1) throw ConfigError("burn_in must be at least 1");
  if (opt.thin < 1) throw ConfigError("thin must be at least 1");
  DbnChain chain(model, opt.out_size, rng);
  for (std::size_t i = 0; i < opt.burn_in; ++i) chain.step(rng);
  std::vector<Grid> out;
  for (std::size_t n = 0; n < opt.n_samples; ++n) {
    if (n > 0) {
      for (std::size_t i = 0; i < opt.thin; ++i) chain.step(rng);
    }
    out.push_back(chain.visible_mean());
  }
  return out;
}

/// Visible means after every sweep of one chain (for mixing diagnostics).
inline std::vector<Grid> chain_means(const DbnModel& model, std::size_t out_size, std::size_t burn_in,
                                     std::size_t length, Rng& rng) {
  DbnChain chain(model, out_size, rng);
  for (std::size_t i = 0; i < burn_in; ++i) chain.step(rng);
  std::vector<Grid> out;
  out.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    chain.step(rng);
    out.push_back(chain.visible_mean());
  }
  return out;
}

struct InpaintFrame {
  Grid image;
  std::vector<std::uint8_t> clamped;  // 1 where the pixel is held fixed
};

/// Zeroes a centred hole x hole square and marks the rest as clamped.
inline InpaintFrame make_inpaint_frame(const Grid& patch, std::size_t hole) {
  if (patch.rows != patch.cols || hole > patch.rows || (patch.rows - hole) % 2 != 0) {
    throw DimensionError("hole must be centred inside a square frame");
  }
  InpaintFrame f{patch, std::vector<std::uint8_t>(patch.size(), 1)};
  const std::size_t off = (patch.rows - hole) / 2;
  for (std::size_t r = off; r < off + hole; ++r) {
    for (std::size_t c = off; c < off + hole; ++c) {
      f.image(r, c) = 0.0;
      f.clamped[r * patch.cols + c] = 0;
    }
  }
  return f;
}

struct InpaintOptions {
  std::size_t iters = 500;
  std::size_t top_steps = 1;
  bool average = false;
};

namespace detail {

inline void clamp_into(Grid& v, const InpaintFrame& f) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (f.clamped[i]) v.data[i] = f.image.data[i];
  }
}

/// Top-down from g: returns the sampled (h-hat, E[s]) state and P(h | g).
struct DownState {
  std::vector<double> h_hat;
  std::vector<double> h_prob;
  std::vector<double> s;
};

inline DownState down_from_g(std::span<const double> g, const SsVisRbmParams& p, const ConvGeometry& geom,
                             Rng& rng) {
  SpikeDraw d = sample_h_given_g(g, p, geom, rng);
  DownState out{std::move(d.h), std::move(d.activation), {}};
  out.s = slab_mean2(out.h_hat, g, p, geom);
  return out;
}

}  // namespace detail

/// Clamped Gibbs sampling. Each iteration: up-pass, top-layer step(s),
/// down-pass with a sampled v, then the clamped pixels are restored.
inline Grid inpaint(const InpaintFrame& frame, const DbnModel& model, const InpaintOptions& opt, Rng& rng) {
  model.validate();
  if (frame.clamped.size() != frame.image.size()) throw DimensionError("clamp mask does not match frame");
  const TiledGeometry g1 = model.layer1.geometry(frame.image.rows);
  if (opt.iters == 0) return frame.image;

  Grid v = frame.image;
  Grid mean_acc(v.rows, v.cols);
  Grid last_mean;
  for (std::size_t it = 0; it < opt.iters; ++it) {
    SpikeSlabState sample_state;
    SpikeSlabState mean_state;
    if (model.depth() == 1) {
      const VisibleTerms t = visible_terms(v, model.layer1);
      const std::vector<double> q = spike_activation(t, model.layer1);
      sample_state.h = sample_bernoulli(q, rng);
      sample_state.s = sample_s_given_vh(t, sample_state.h, model.layer1, rng);
      mean_state = sample_state;
    } else {
      const SsVisRbmParams& p2 = *model.layer2;
      const ConvGeometry g2 = p2.geometry(g1.positions);
      const UpState up = infer_up(v, model, rng, 2);
      std::vector<double> g = sample_bernoulli(up.g, rng);
      if (model.depth() == 3) {
        for (std::size_t k = 0; k < opt.top_steps; ++k) g = brbm_gibbs_sweep(g, *model.layer3, rng).v;
      } else {
        for (std::size_t k = 1; k < opt.top_steps; ++k) {
          const detail::DownState d = detail::down_from_g(g, p2, g2, rng);
          g = sample_g_given_sh({d.h_hat, d.s}, p2, rng);
        }
      }
      detail::DownState d = detail::down_from_g(g, p2, g2, rng);
      sample_state = {d.h_hat, d.s};
      mean_state = {std::move(d.h_prob), std::move(d.s)};
    }
    v = sample_v_given_sh(sample_state, model.layer1, g1, rng);
    detail::clamp_into(v, frame);
    last_mean = visible_mean(mean_state, model.layer1, g1);
    if (opt.average) {
      for (std::size_t i = 0; i < mean_acc.size(); ++i) mean_acc.data[i] += last_mean.data[i];
    }
  }
  Grid out = opt.average ? mean_acc : last_mean;
  if (opt.average) {
    for (auto& x : out.data) x /= static_cast<double>(opt.iters);
  }
  detail::clamp_into(out, frame);
  return out;
}

// ------------------------------------------------------------ training --

struct DbnSpec {
  std::size_t layers = 1;
  std::size_t kernel = 11;
  std::size_t tilings = 11;
  std::size_t filters = 32;
  std::size_t kernel2 = 2;
  std::size_t filters2 = 128;
  std::size_t kernel3 = 2;
  std::size_t filters3 = 128;
  bool bias_shift = true;
  std::size_t patch = 98;
  SsRbmInit init;
  TrainConfig train;  // shared hyper-parameters; algorithms come from `algorithms`
  std::vector<Algorithm> algorithms;

  /// FPCD for a lone layer; CD for every lower layer and PCD on top otherwise.
  static std::vector<Algorithm> default_algorithms(std::size_t layers) {
    if (layers == 1) return {Algorithm::fpcd};
    std::vector<Algorithm> out(layers - 1, Algorithm::cd);
    out.push_back(Algorithm::pcd);
    return out;
  }

  std::vector<Algorithm> resolved_algorithms() const {
    return algorithms.empty() ? default_algorithms(layers) : algorithms;
  }

  void validate() const {
    if (layers < 1 || layers > 3) throw ConfigError("layers must be 1, 2 or 3");
    if (!algorithms.empty() && algorithms.size() != layers) throw ConfigError("one algorithm per layer is required");
    if (!valid_tiled_size(patch, kernel, tilings)) throw ConfigError("patch size does not fit the tiling");
    const std::size_t m = (patch + 1 - tilings) / kernel;
    if (layers >= 2 && m < kernel2) throw ConfigError("first-layer maps are smaller than the second-layer kernel");
    if (layers >= 3 && m + 1 - kernel2 < kernel3) throw ConfigError("second-layer maps are smaller than the third-layer kernel");
    train.validate();
  }
};

/// Single-layer texture model with the protocol defaults.
inline DbnSpec single_layer_preset() { return {}; }

inline DbnSpec two_layer_preset() {
  DbnSpec s;
  s.layers = 2;
  return s;
}

/// 3-DBN trained CD-CD-PCD.
inline DbnSpec three_layer_preset() {
  DbnSpec s;
  s.layers = 3;
  return s;
}

/// Multi-texture stack: 96 first-layer filters, 256/256 above with 2x2 fields.
inline DbnSpec multi_texture_preset() {
  DbnSpec s;
  s.layers = 3;
  s.filters = 96;
  s.filters2 = 256;
  s.filters3 = 256;
  s.kernel2 = 2;
  s.kernel3 = 2;
  return s;
}

/// Update numbers keep counting across layers, so layer j starts after
/// (j - 1) * updates rows.
struct TrainLog {
  std::ostream* out = nullptr;
  bool wall_clock = true;
  std::size_t offset = 0;
};

/// Supplies `count` normalized training patches.
using PatchSource = std::function<std::vector<Grid>(std::size_t count, Rng& rng)>;

namespace detail {

inline std::vector<SpikeSlabState> map_to_layer2(const std::vector<Grid>& xs, const DbnModel& m, Rng& rng) {
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < xs.size(); ++i) rngs.emplace_back(rng());
  std::vector<SpikeSlabState> out(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) {
    UpState u = infer_up(xs[i], m, rngs[i], 1);
    out[i] = {std::move(u.q), std::move(u.m)};
  });
  return out;
}

inline std::vector<std::vector<double>> map_to_layer3(const std::vector<Grid>& xs, const DbnModel& m, Rng& rng) {
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < xs.size(); ++i) rngs.emplace_back(rng());
  std::vector<std::vector<double>> out(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) { out[i] = infer_up(xs[i], m, rngs[i], 2).g; });
  return out;
}

template <class P, class MapFn>
P train_layer(P init, std::size_t layer, const DbnSpec& spec, Algorithm algo, const PatchSource& source,
              const std::vector<Grid>& monitor_train, const std::vector<Grid>& monitor_val, MapFn map,
              TrainLog log) {
  TrainConfig cfg = spec.train;
  cfg.algorithm = algo;
  log.offset = (layer - 1) * cfg.updates;
  cfg.seed = derive_seed(spec.train.seed, 100 + layer);
  Rng data_rng = make_stream(cfg.seed, Stream::data);
  Rng map_rng = make_stream(cfg.seed, Stream::eval);
  Rng step_rng = make_stream(cfg.seed, Stream::chains, 1u << 20);

  auto first = map(source(cfg.minibatch, data_rng), map_rng);
  TrainState<P> st = make_train_state(init, first.front(), cfg);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t u = 0; u < cfg.updates; ++u) {
    auto batch = u == 0 ? std::move(first) : map(source(cfg.minibatch, data_rng), map_rng);
    train_step(batch, st, cfg, step_rng);
    if (!all_finite(st.params)) throw NumericalError("parameters diverged during training");
    if (log.out && ((u + 1) % cfg.updates_per_epoch == 0 || u + 1 == cfg.updates)) {
      Rng eval = make_stream(cfg.seed, Stream::eval, 1);
      const auto tr = map(monitor_train, eval);
      Rng eval2 = make_stream(cfg.seed, Stream::eval, 2);
      const auto va = map(monitor_val, eval2);
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
      *log.out << (log.offset + u + 1) << '\t' << (u + 1) / cfg.updates_per_epoch << '\t'
               << mean_free_energy(tr, st.params) << '\t' << mean_free_energy(va, st.params) << '\t'
               << mean_recon_error(tr, st.params) << '\t' << (log.wall_clock ? ms.count() : 0) << '\n';
    }
  }
  return st.params;
}

}  // namespace detail

inline constexpr const char* kTrainLogHeader =
    "update\tepoch\tfree_energy_train\tfree_energy_val\trecon_err\twall_ms";

/// Greedy layer-wise training. Lower layers are frozen before the next one is
/// initialized from them and trained on data mapped up online.
inline DbnModel train_dbn(const DbnSpec& spec, const PatchSource& source, const std::vector<Grid>& monitor_train,
                          const std::vector<Grid>& monitor_val, const TrainLog& log = {}) {
  spec.validate();
  const auto algos = spec.resolved_algorithms();
  if (log.out) *log.out << kTrainLogHeader << '\n';

  DbnModel model;
  Rng init_rng = make_stream(spec.train.seed, Stream::init);
  SsRbmParams p1 = init_ssrbm_params(spec.kernel, spec.tilings, spec.filters, init_rng, spec.init);
  auto ident = [](const std::vector<Grid>& xs, Rng&) { return xs; };
  model.layer1 = detail::train_layer(p1, 1, spec, algos[0], source, monitor_train, monitor_val, ident, log);
  if (spec.layers >= 2) {
    SsVisRbmParams p2 = init_from_lower(model.layer1, spec.filters2, spec.kernel2, init_rng);
    p2.bias_shift = spec.bias_shift;
    auto up2 = [&](const std::vector<Grid>& xs, Rng& r) { return detail::map_to_layer2(xs, model, r); };
    model.layer2 = detail::train_layer(p2, 2, spec, algos[1], source, monitor_train, monitor_val, up2, log);
  }
  if (spec.layers >= 3) {
    BinaryRbmParams p3 = init_brbm_params(spec.filters2, spec.kernel3, spec.filters3, init_rng);
    auto up3 = [&](const std::vector<Grid>& xs, Rng& r) { return detail::map_to_layer3(xs, model, r); };
    model.layer3 = detail::train_layer(p3, 3, spec, algos[2], source, monitor_train, monitor_val, up3, log);
  }
  return model;
}

}  // namespace tssrbm
