#pragma once

// Run configuration: flat `key = value` files with [section] headers, every
// key also exposed as a --flag. Flags override file values.

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dbn.hpp"
#include "errors.hpp"

namespace tssrbm {

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"prepare", "train",     "sample", "inpaint",
                                              "eval-tss", "eval-mssim", "mixing"};
  return names;
}

struct RunConfig {
  std::string command;

  // [io]
  std::string texture;  // source PGM
  std::string dataset;  // cached preprocessed texture
  std::string model = "model.ssdbn";
  std::string out = "out";
  std::string name;  // texture label in tables; defaults to the file stem

  // [data]
  std::size_t target = 0;  // rescaled height, 0 keeps the source size

  // [model] and [train]
  DbnSpec spec;
  std::string algorithms = "auto";
  std::size_t monitor = 16;
  bool wall_clock = true;

  // [sample]
  GenerateOptions sample;

  // [inpaint]
  std::size_t frame = 76;
  std::size_t hole = 54;
  std::size_t frames = 20;
  std::size_t seeds = 5;
  InpaintOptions inpaint;

  // [eval]
  std::size_t tss_patch = 19;
  std::size_t max_lag = 100;
  std::size_t chain_length = 1000;
  std::size_t mixing_burn_in = 100;

  // [run]
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const;
};

namespace detail {

inline std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t x = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, x);
  if (v.empty() || res.ec != std::errc() || res.ptr != end) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return x;
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

}  // namespace detail

struct ConfigKey {
  std::string section;
  std::string name;
  std::string help;
  bool protocol = false;  // default fixed by the published experimental protocol
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

/// Shortest text that parses back to the same double.
inline std::string format_real(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::vector<Algorithm> parse_algorithm_list(const std::string& s) {
  if (s == "auto") return {};
  std::vector<Algorithm> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_algorithm(detail::trim(item)));
  if (out.empty()) throw ConfigError("algorithms must be 'auto' or a comma-separated list");
  return out;
}

/// Every recognised key, in help order.
inline const std::vector<ConfigKey>& config_keys() {
  using detail::parse_bool;
  using detail::parse_real;
  using detail::parse_size;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto str = [&](std::string sec, std::string name, std::string help, std::string RunConfig::*field) {
      k.push_back({sec, name, help, false, [field](RunConfig& c, const std::string& v) { c.*field = v; },
                   [field](const RunConfig& c) { return c.*field; }});
    };
    auto size = [&](std::string sec, std::string name, std::string help, bool protocol, auto access) {
      k.push_back({sec, name, help, protocol,
                   [access, name](RunConfig& c, const std::string& v) { access(c) = parse_size(name, v); },
                   [access](const RunConfig& c) { return std::to_string(access(c)); }});
    };
    auto real = [&](std::string sec, std::string name, std::string help, bool protocol, auto access) {
      k.push_back({sec, name, help, protocol,
                   [access, name](RunConfig& c, const std::string& v) { access(c) = parse_real(name, v); },
                   [access](const RunConfig& c) { return format_real(access(c)); }});
    };
    auto flag = [&](std::string sec, std::string name, std::string help, auto access) {
      k.push_back({sec, name, help, false,
                   [access, name](RunConfig& c, const std::string& v) { access(c) = parse_bool(name, v); },
                   [access](const RunConfig& c) { return access(c) ? "true" : "false"; }});
    };
#define TSSRBM_FIELD(expr) [](auto& c) -> auto& { return expr; }

    str("io", "texture", "source texture (binary PGM)", &RunConfig::texture);
    str("io", "dataset", "preprocessed dataset cache; written by prepare, read by the other commands",
        &RunConfig::dataset);
    str("io", "model", "model file", &RunConfig::model);
    str("io", "out", "output directory", &RunConfig::out);
    str("io", "name", "texture label used in metric tables; empty uses the texture file stem", &RunConfig::name);

    size("data", "target", "rescaled texture height in pixels, 0 keeps the source size", false,
         TSSRBM_FIELD(c.target));

    size("model", "layers", "number of layers (1-3)", false, TSSRBM_FIELD(c.spec.layers));
    size("model", "kernel", "first-layer receptive field side", true, TSSRBM_FIELD(c.spec.kernel));
    size("model", "tilings", "number of diagonal tilings", true, TSSRBM_FIELD(c.spec.tilings));
    size("model", "filters", "filters per tiling", true, TSSRBM_FIELD(c.spec.filters));
    size("model", "kernel2", "second-layer receptive field side", true, TSSRBM_FIELD(c.spec.kernel2));
    size("model", "filters2", "second-layer hidden maps", false, TSSRBM_FIELD(c.spec.filters2));
    size("model", "kernel3", "third-layer receptive field side", true, TSSRBM_FIELD(c.spec.kernel3));
    size("model", "filters3", "third-layer hidden maps", false, TSSRBM_FIELD(c.spec.filters3));
    flag("model", "bias_shift", "second-layer energy carries the 1/2 alpha mu^2 h term",
         TSSRBM_FIELD(c.spec.bias_shift));
    real("model", "weight_std", "initial weight standard deviation", false, TSSRBM_FIELD(c.spec.init.weight_std));
    real("model", "spike_bias", "initial spike bias", false, TSSRBM_FIELD(c.spec.init.spike_bias));
    real("model", "slab_mean", "initial slab mean", false, TSSRBM_FIELD(c.spec.init.slab_mean));
    real("model", "slab_precision", "initial slab precision", false, TSSRBM_FIELD(c.spec.init.slab_precision));
    real("model", "visible_precision", "initial visible precision", false,
         TSSRBM_FIELD(c.spec.init.visible_precision));
    real("model", "gated_precision", "initial h-gated visible precision", false,
         TSSRBM_FIELD(c.spec.init.gated_precision));

    size("train", "patch", "training patch side", true, TSSRBM_FIELD(c.spec.patch));
    str("train", "algorithms", "auto (fpcd alone, cd below pcd when stacked) or a list such as cd,pcd",
        &RunConfig::algorithms);
    size("train", "k", "Gibbs steps per negative phase", false, TSSRBM_FIELD(c.spec.train.k));
    real("train", "learning_rate", "learning rate", false, TSSRBM_FIELD(c.spec.train.learning_rate));
    size("train", "lr_warm", "updates before 1/t learning-rate decay starts, 0 disables", false,
         TSSRBM_FIELD(c.spec.train.lr_warm));
    real("train", "momentum", "momentum", false, TSSRBM_FIELD(c.spec.train.momentum));
    size("train", "minibatch", "patches per update", true, TSSRBM_FIELD(c.spec.train.minibatch));
    size("train", "n_chains", "persistent chains", false, TSSRBM_FIELD(c.spec.train.n_chains));
    real("train", "restart_prob", "per-update chain restart probability", true,
         TSSRBM_FIELD(c.spec.train.restart_prob));
    real("train", "fast_rate", "fast-weight learning rate, negative means learning_rate", false,
         TSSRBM_FIELD(c.spec.train.fast_rate));
    real("train", "fast_decay", "fast-weight decay per update", false, TSSRBM_FIELD(c.spec.train.fast_decay));
    flag("train", "site_average", "divide each shared parameter's gradient by the number of sites sharing it",
         TSSRBM_FIELD(c.spec.train.site_average));
    flag("train", "proper_guard", "shrink first-layer filters so every spike configuration stays proper",
         TSSRBM_FIELD(c.spec.train.constraints.proper));
    size("train", "updates", "updates per layer", false, TSSRBM_FIELD(c.spec.train.updates));
    size("train", "updates_per_epoch", "updates between log rows", false,
         TSSRBM_FIELD(c.spec.train.updates_per_epoch));
    size("train", "monitor", "held-out patches used for the log's free energies", false, TSSRBM_FIELD(c.monitor));
    flag("train", "wall_clock", "record elapsed milliseconds in the log (false writes 0)",
         TSSRBM_FIELD(c.wall_clock));

    size("sample", "n_samples", "samples to generate", true, TSSRBM_FIELD(c.sample.n_samples));
    size("sample", "burn_in", "top-layer sweeps before the first sample", false, TSSRBM_FIELD(c.sample.burn_in));
    size("sample", "thin", "sweeps between samples", false, TSSRBM_FIELD(c.sample.thin));
    size("sample", "out_size", "sample side in pixels", true, TSSRBM_FIELD(c.sample.out_size));

    size("inpaint", "frame", "frame side in pixels", true, TSSRBM_FIELD(c.frame));
    size("inpaint", "hole", "side of the zeroed centre", true, TSSRBM_FIELD(c.hole));
    size("inpaint", "frames", "frames cropped from the test half", true, TSSRBM_FIELD(c.frames));
    size("inpaint", "seeds", "inpainting runs per frame", true, TSSRBM_FIELD(c.seeds));
    size("inpaint", "iters", "Gibbs iterations", true, TSSRBM_FIELD(c.inpaint.iters));
    size("inpaint", "top_steps", "top-layer steps per iteration", false, TSSRBM_FIELD(c.inpaint.top_steps));
    flag("inpaint", "average", "average the conditional means over iterations", TSSRBM_FIELD(c.inpaint.average));

    size("eval", "tss_patch", "TSS patch side", true, TSSRBM_FIELD(c.tss_patch));
    size("eval", "max_lag", "largest autocorrelation lag", false, TSSRBM_FIELD(c.max_lag));
    size("eval", "chain_length", "recorded sweeps for the mixing diagnostic", false, TSSRBM_FIELD(c.chain_length));
    size("eval", "mixing_burn_in", "sweeps discarded before recording", false, TSSRBM_FIELD(c.mixing_burn_in));

    k.push_back({"run", "seed", "run seed; data, chains, init and eval streams derive from it", false,
                 [](RunConfig& c, const std::string& v) {
                   c.seed = detail::parse_size("seed", v);
                   c.spec.train.seed = c.seed;
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    size("run", "threads", "worker threads", false, TSSRBM_FIELD(c.threads));
#undef TSSRBM_FIELD
    return k;
  }();
  return keys;
}

inline const ConfigKey* find_key(const std::string& name) {
  for (const auto& k : config_keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

inline void set_key(RunConfig& c, const std::string& name, const std::string& value) {
  const ConfigKey* k = find_key(name);
  if (!k) throw ConfigError("unknown key '" + name + "'");
  k->set(c, value);
}

/// Applies a flat config text. Keys may appear under their own [section] or
/// before any section header.
inline void apply_config_text(RunConfig& c, const std::string& text, const std::string& origin = "config") {
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    const std::string where = origin + ":" + std::to_string(line_no);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header '" + line + "'");
      section = detail::trim(line.substr(1, line.size() - 2));
      const bool known = std::any_of(config_keys().begin(), config_keys().end(),
                                     [&](const ConfigKey& k) { return k.section == section; });
      if (!known) throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const ConfigKey* k = find_key(key);
    if (!k) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!section.empty() && k->section != section) {
      throw ConfigError(where + ": key '" + key + "' belongs to [" + k->section + "], not [" + section + "]");
    }
    try {
      k->set(c, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

inline void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(c, ss.str(), path);
}

/// The config as it would be written back to a file.
inline std::string dump_config(const RunConfig& c) {
  std::ostringstream out;
  std::string section;
  for (const auto& k : config_keys()) {
    if (k.section != section) {
      out << (section.empty() ? "" : "\n") << '[' << k.section << "]\n";
      section = k.section;
    }
    out << k.name << " = " << k.get(c) << '\n';
  }
  return out.str();
}

inline void RunConfig::validate() const {
  if (!command.empty() && std::find(command_names().begin(), command_names().end(), command) == command_names().end()) {
    throw ConfigError("unknown command '" + command + "'");
  }
  DbnSpec s = spec;
  s.algorithms = parse_algorithm_list(algorithms);
  s.validate();
  if (sample.burn_in < 1) throw ConfigError("burn_in must be at least 1");
  if (sample.thin < 1) throw ConfigError("thin must be at least 1");
  if (sample.n_samples < 1) throw ConfigError("n_samples must be at least 1");
  if (!valid_tiled_size(sample.out_size, spec.kernel, spec.tilings)) {
    throw ConfigError("out_size " + std::to_string(sample.out_size) + " does not fit the tiling");
  }
  if (!valid_tiled_size(frame, spec.kernel, spec.tilings)) {
    throw ConfigError("frame " + std::to_string(frame) + " does not fit the tiling");
  }
  if (hole >= frame || (frame - hole) % 2 != 0) throw ConfigError("hole must be smaller than frame with an even border");
  if (hole < 11) throw ConfigError("hole must be at least 11 pixels for MSSIM");
  if (frames < 1 || seeds < 1) throw ConfigError("frames and seeds must be at least 1");
  if (tss_patch < 1 || tss_patch > sample.out_size) throw ConfigError("tss_patch must lie in [1, out_size]");
  if (chain_length <= max_lag) throw ConfigError("chain_length must exceed max_lag");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (monitor < 1) throw ConfigError("monitor must be at least 1");
}

}  // namespace tssrbm
