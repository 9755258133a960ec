#pragma once

// The batch commands behind the CLI. Each one reads files, runs a pipeline
// stage and writes images, tables or models under cfg.out.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"
#include "data.hpp"
#include "dbn.hpp"
#include "metrics.hpp"
#include "model_io.hpp"

namespace tssrbm {

namespace cmd {

namespace fs = std::filesystem;

inline fs::path out_path(const RunConfig& c, const std::string& file) {
  fs::create_directories(c.out);
  return fs::path(c.out) / file;
}

inline std::string numbered(const std::string& stem, std::size_t i, std::size_t width = 3) {
  std::ostringstream s;
  s << stem << std::setw(static_cast<int>(width)) << std::setfill('0') << i;
  return s.str();
}

/// Texture from the cache when one is named and present, otherwise from the PGM.
inline TextureDataset load_texture(const RunConfig& c) {
  TextureDataset d;
  if (!c.dataset.empty() && fs::exists(c.dataset)) {
    d = load_dataset(c.dataset);
  } else if (!c.texture.empty()) {
    const Grid img = load_grayscale(c.texture);
    d = preprocess(img, c.target == 0 ? img.rows : c.target, fs::path(c.texture).stem().string());
  } else {
    throw ConfigError("this command needs 'texture' or an existing 'dataset'");
  }
  if (!c.name.empty()) d.name = c.name;
  return d;
}

inline std::string model_label(const DbnModel& m) { return m.depth() == 1 ? "tssrbm" : "dbn" + std::to_string(m.depth()); }

inline NormStats stats_of(const DbnModel& m) { return {m.norm_mean, m.norm_std}; }

/// `count` crops of side `size` from `src`, or from `fallback` if `src` is too small.
inline std::vector<Grid> crops(const Grid& src, const Grid& fallback, std::size_t size, std::size_t count, Rng& rng) {
  const Grid& from = (src.rows >= size && src.cols >= size) ? src : fallback;
  std::vector<Grid> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_crop(from, size, rng));
  return out;
}

inline void write_table(const RunConfig& c, const std::string& file, const MetricReport& r, std::ostream& log) {
  std::ofstream f(out_path(c, file));
  f << kMetricHeader << '\n';
  write_metric_row(f, r);
  if (!f) throw IoError("cannot write " + file);
  log << kMetricHeader << '\n';
  write_metric_row(log, r);
}

inline int prepare(const RunConfig& c, std::ostream& log) {
  if (c.texture.empty()) throw ConfigError("prepare needs 'texture'");
  const Grid img = load_grayscale(c.texture);
  TextureDataset d = preprocess(img, c.target == 0 ? img.rows : c.target,
                                c.name.empty() ? fs::path(c.texture).stem().string() : c.name);
  const std::string path = c.dataset.empty() ? out_path(c, d.name + ".ssdat").string() : c.dataset;
  save_dataset(d, path);
  log << "prepared " << d.name << ": train " << d.train.rows << "x" << d.train.cols << ", test " << d.test.rows
      << "x" << d.test.cols << ", mean " << d.stats.mean << ", std " << d.stats.std << " -> " << path << '\n';
  return 0;
}

inline int train(const RunConfig& c, std::ostream& log) {
  const TextureDataset d = load_texture(c);
  DbnSpec spec = c.spec;
  spec.algorithms = parse_algorithm_list(c.algorithms);
  spec.train.seed = c.seed;
  const std::size_t patch = spec.patch;
  PatchSource source = [&](std::size_t count, Rng& rng) {
    return sample_patches(d, patch, count, rng, spec.kernel, spec.tilings);
  };
  Rng mon = make_stream(c.seed, Stream::eval, 7);
  const auto monitor_train = crops(d.train, d.train, patch, c.monitor, mon);
  const auto monitor_val = crops(d.test, d.train, patch, c.monitor, mon);

  std::ofstream tsv(out_path(c, "train_log.tsv"));
  DbnModel m = train_dbn(spec, source, monitor_train, monitor_val, {&tsv, c.wall_clock, 0});
  m.norm_mean = d.stats.mean;
  m.norm_std = d.stats.std;
  if (fs::path(c.model).has_parent_path()) fs::create_directories(fs::path(c.model).parent_path());
  save_model(m, c.model);
  log << "trained " << m.depth() << "-layer model on " << d.name << " (" << spec.train.updates
      << " updates per layer) -> " << c.model << '\n';
  return 0;
}

inline int sample(const RunConfig& c, std::ostream& log) {
  const DbnModel m = load_model(c.model);
  Rng rng = make_stream(c.seed, Stream::chains);
  const auto samples = generate(m, c.sample, rng);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    save_image(samples[i], stats_of(m), out_path(c, numbered("sample_", i) + ".pgm").string());
  }
  log << "wrote " << samples.size() << " samples of " << c.sample.out_size << "x" << c.sample.out_size << " to "
      << c.out << '\n';
  return 0;
}

struct Inpainting {
  Grid truth;
  Grid result;
  std::size_t frame = 0;
  std::size_t seed = 0;
};

/// Frames cropped from the test half, each completed `seeds` times.
inline std::vector<Inpainting> run_inpaintings(const RunConfig& c, const DbnModel& m, const TextureDataset& d) {
  Rng frame_rng = make_stream(c.seed, Stream::data, 1);
  const auto truths = crops(d.test, d.train, c.frame, c.frames, frame_rng);
  std::vector<Inpainting> out(c.frames * c.seeds);
  parallel_for(out.size(), [&](std::size_t i) {
    const std::size_t f = i / c.seeds, s = i % c.seeds;
    Rng rng = make_stream(c.seed, Stream::chains, i);
    out[i] = {truths[f], inpaint(make_inpaint_frame(truths[f], c.hole), m, c.inpaint, rng), f, s};
  });
  return out;
}

inline int inpaint_cmd(const RunConfig& c, std::ostream& log) {
  const DbnModel m = load_model(c.model);
  const TextureDataset d = load_texture(c);
  const auto runs = run_inpaintings(c, m, d);
  for (const auto& r : runs) {
    const std::string tag = numbered("", r.frame, 2);
    if (r.seed == 0) {
      save_image(r.truth, stats_of(m), out_path(c, "truth_" + tag + ".pgm").string());
      save_image(make_inpaint_frame(r.truth, c.hole).image, stats_of(m), out_path(c, "frame_" + tag + ".pgm").string());
    }
    save_image(r.result, stats_of(m), out_path(c, "inpaint_" + tag + "_" + std::to_string(r.seed) + ".pgm").string());
  }
  log << "wrote " << runs.size() << " inpaintings (" << c.frames << " frames x " << c.seeds << " seeds, " << c.inpaint.iters
      << " iterations) to " << c.out << '\n';
  return 0;
}

/// The hole region in 8-bit display units, clamped like a saved image.
inline Grid display_hole(const Grid& g, const RunConfig& c, const NormStats& s) {
  const std::size_t off = (c.frame - c.hole) / 2;
  Grid out = denormalize(g.crop(off, off, c.hole, c.hole), s);
  for (auto& x : out.data) x = std::clamp(x * 255.0, 0.0, 255.0);
  return out;
}

inline int eval_mssim(const RunConfig& c, std::ostream& log) {
  const DbnModel m = load_model(c.model);
  const TextureDataset d = load_texture(c);
  const auto runs = run_inpaintings(c, m, d);
  std::vector<double> scores;
  for (const auto& r : runs) scores.push_back(mssim(display_hole(r.truth, c, stats_of(m)), display_hole(r.result, c, stats_of(m))));
  write_table(c, "mssim.tsv", MetricReport::from(d.name, model_label(m), "mssim", scores), log);
  return 0;
}

inline int eval_tss(const RunConfig& c, std::ostream& log) {
  const DbnModel m = load_model(c.model);
  const TextureDataset d = load_texture(c);
  Rng rng = make_stream(c.seed, Stream::chains);
  const auto samples = generate(m, c.sample, rng);
  std::vector<double> scores;
  for (const auto& s : samples) scores.push_back(tss(s, d.test, c.tss_patch));
  write_table(c, "tss.tsv", MetricReport::from(d.name, model_label(m), "tss", scores), log);
  return 0;
}

inline int mixing(const RunConfig& c, std::ostream& log) {
  const DbnModel m = load_model(c.model);
  Rng rng = make_stream(c.seed, Stream::chains);
  const auto chain = chain_means(m, c.sample.out_size, c.mixing_burn_in, c.chain_length, rng);
  const auto r = autocorr_spectrum(chain, c.max_lag);
  std::ofstream f(out_path(c, "mixing.tsv"));
  f << std::setprecision(10) << "lag\tr\n";
  for (std::size_t t = 0; t < r.size(); ++t) f << t << '\t' << r[t] << '\n';
  if (!f) throw IoError("cannot write mixing.tsv");
  log << model_label(m) << " r(" << c.max_lag << ") = " << r.back() << " over " << c.chain_length << " sweeps\n";
  return 0;
}

}  // namespace cmd

/// Runs cfg.command. Returns the process exit status.
inline int dispatch(const RunConfig& c, std::ostream& log) {
  c.validate();
  worker_limit() = c.threads;
  int rc = 0;
  if (c.command == "prepare") rc = cmd::prepare(c, log);
  else if (c.command == "train") rc = cmd::train(c, log);
  else if (c.command == "sample") rc = cmd::sample(c, log);
  else if (c.command == "inpaint") rc = cmd::inpaint_cmd(c, log);
  else if (c.command == "eval-tss") rc = cmd::eval_tss(c, log);
  else if (c.command == "eval-mssim") rc = cmd::eval_mssim(c, log);
  else if (c.command == "mixing") rc = cmd::mixing(c, log);
  else throw ConfigError("no command given");
  std::ofstream record(cmd::out_path(c, c.command + ".cfg"));
  record << dump_config(c);
  return rc;
}

}  // namespace tssrbm
