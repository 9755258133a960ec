#pragma once

// Texture similarity (max NCC over test windows), MSSIM and chain
// autocorrelation.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "parallel.hpp"

namespace tssrbm {

/// a.b / (|a| |b|), no mean subtraction.
inline double ncc(const Grid& a, const Grid& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw DimensionError("ncc arguments differ in shape");
  const double na = std::sqrt(squared_norm(a.data)), nb = std::sqrt(squared_norm(b.data));
  if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateInputError("ncc of a zero-norm patch");
  return dot(a.data, b.data) / (na * nb);
}

inline Grid center_crop(const Grid& g, std::size_t size) {
  if (size > g.rows || size > g.cols) throw DimensionError("crop larger than image");
  return g.crop((g.rows - size) / 2, (g.cols - size) / 2, size, size);
}

/// Max NCC between the sample's centred patch and every patch x patch window
/// of the test region (stride 1).
inline double tss(const Grid& sample, const Grid& test_region, std::size_t patch = 19) {
  if (patch == 0 || patch > test_region.rows || patch > test_region.cols) {
    throw DimensionError("tss patch does not fit the test region");
  }
  const Grid s = center_crop(sample, patch);
  const double ns = std::sqrt(squared_norm(s.data));
  if (!(ns > 0.0)) throw DegenerateInputError("tss sample patch has zero norm");
  const std::size_t R = test_region.rows, C = test_region.cols;
  // Integral image of squares for the window norms.
  std::vector<double> sq((R + 1) * (C + 1), 0.0);
  for (std::size_t r = 0; r < R; ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      row += test_region(r, c) * test_region(r, c);
      sq[(r + 1) * (C + 1) + c + 1] = sq[r * (C + 1) + c + 1] + row;
    }
  }
  const std::size_t nr = R - patch + 1, nc = C - patch + 1;
  std::vector<double> best_row(nr, -2.0);
  parallel_for(nr, [&](std::size_t r) {
    double best = -2.0;
    for (std::size_t c = 0; c < nc; ++c) {
      const double energy = sq[(r + patch) * (C + 1) + c + patch] - sq[r * (C + 1) + c + patch] -
                            sq[(r + patch) * (C + 1) + c] + sq[r * (C + 1) + c];
      if (!(energy > 1e-300)) continue;
      double acc = 0.0;
      for (std::size_t a = 0; a < patch; ++a) {
        const double* x = &test_region.data[(r + a) * C + c];
        const double* y = &s.data[a * patch];
        for (std::size_t b = 0; b < patch; ++b) acc += x[b] * y[b];
      }
      best = std::max(best, acc / (ns * std::sqrt(energy)));
    }
    best_row[r] = best;
  });
  const double best = *std::max_element(best_row.begin(), best_row.end());
  if (best < -1.5) throw DegenerateInputError("every test window has zero norm");
  return std::min(best, 1.0);
}

/// Mean SSIM over all valid 11x11 Gaussian windows (sigma 1.5) with
/// K1 = 0.01, K2 = 0.03 and dynamic range L.
inline double mssim(const Grid& x, const Grid& y, double L) {
  constexpr std::size_t w = 11;
  if (x.rows != y.rows || x.cols != y.cols) throw DimensionError("mssim arguments differ in shape");
  if (x.rows < w || x.cols < w) throw DimensionError("mssim needs at least 11x11 images");
  double kern[w][w];
  double total = 0.0;
  for (std::size_t a = 0; a < w; ++a) {
    for (std::size_t b = 0; b < w; ++b) {
      const double da = static_cast<double>(a) - 5.0, db = static_cast<double>(b) - 5.0;
      kern[a][b] = std::exp(-(da * da + db * db) / (2.0 * 1.5 * 1.5));
      total += kern[a][b];
    }
  }
  for (auto& row : kern) {
    for (double& k : row) k /= total;
  }
  const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
  const std::size_t nr = x.rows - w + 1, nc = x.cols - w + 1;
  std::vector<double> row_sum(nr, 0.0);
  parallel_for(nr, [&](std::size_t r) {
    double acc_row = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (std::size_t a = 0; a < w; ++a) {
        for (std::size_t b = 0; b < w; ++b) {
          const double k = kern[a][b], xv = x(r + a, c + b), yv = y(r + a, c + b);
          mx += k * xv;
          my += k * yv;
          sxx += k * xv * xv;
          syy += k * yv * yv;
          sxy += k * xv * yv;
        }
      }
      const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
      acc_row += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    row_sum[r] = acc_row;
  });
  double acc = 0.0;
  for (double v : row_sum) acc += v;
  return acc / static_cast<double>(nr * nc);
}

/// Dynamic range taken from both images (max - min), 255 if they are flat.
inline double mssim(const Grid& x, const Grid& y) {
  double lo = x.data.at(0), hi = lo;
  for (const Grid* g : {&x, &y}) {
    for (double v : g->data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  return mssim(x, y, hi > lo ? hi - lo : 255.0);
}

/// r(tau) for tau = 0..max_lag, images flattened, centred on the chain mean.
inline std::vector<double> autocorr_spectrum(const std::vector<Grid>& chain, std::size_t max_lag) {
  if (chain.size() <= max_lag) throw ConfigError("chain must be longer than max_lag");
  const std::size_t T = chain.size(), D = chain.front().size();
  std::vector<double> mean(D, 0.0);
  for (const Grid& g : chain) {
    if (g.size() != D) throw DimensionError("chain images differ in size");
    for (std::size_t i = 0; i < D; ++i) mean[i] += g.data[i];
  }
  for (auto& m : mean) m /= static_cast<double>(T);
  std::vector<std::vector<double>> centred(T, std::vector<double>(D));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < D; ++i) centred[t][i] = chain[t].data[i] - mean[i];
  }
  double var = 0.0;
  for (const auto& x : centred) var += squared_norm(x);
  if (!(var > 0.0)) throw DegenerateInputError("chain has zero variance");
  std::vector<double> r(max_lag + 1, 0.0);
  parallel_for(max_lag + 1, [&](std::size_t tau) {
    double acc = 0.0;
    for (std::size_t t = 0; t + tau < T; ++t) acc += dot(centred[t], centred[t + tau]);
    r[tau] = acc / var;
  });
  r[0] = 1.0;
  return r;
}

struct MetricReport {
  std::string texture;
  std::string model;
  std::string metric;
  std::vector<double> scores;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation

  static MetricReport from(std::string texture, std::string model, std::string metric, std::vector<double> scores) {
    MetricReport r{std::move(texture), std::move(model), std::move(metric), std::move(scores), 0.0, 0.0};
    const auto n = static_cast<double>(r.scores.size());
    for (double s : r.scores) r.mean += s;
    if (!r.scores.empty()) r.mean /= n;
    if (r.scores.size() > 1) {
      double ss = 0.0;
      for (double s : r.scores) ss += (s - r.mean) * (s - r.mean);
      r.std = std::sqrt(ss / (n - 1.0));
    }
    return r;
  }
};

inline constexpr const char* kMetricHeader = "texture\tmodel\tmetric\tmean\tstd\tn";

inline void write_metric_row(std::ostream& out, const MetricReport& r) {
  out << std::setprecision(10) << r.texture << '\t' << r.model << '\t' << r.metric << '\t' << r.mean << '\t' << r.std << '\t'
      << r.scores.size() << '\n';
}

}  // namespace tssrbm
