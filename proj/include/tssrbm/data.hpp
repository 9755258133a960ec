#pragma once

// Grayscale PGM I/O, texture preprocessing and random patch sampling.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "random.hpp"

namespace tssrbm {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

/// Binary P5 with maxval 255; pixels are returned in [0, 1].
inline Grid decode_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&] {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw FormatError("malformed PGM header");
    }
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos++] - '0');
      if (v > (1u << 24)) throw FormatError("PGM dimension too large");
    }
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError("not a binary PGM (P5) file");
  pos = 2;
  const std::size_t w = number();
  const std::size_t h = number();
  const std::size_t maxval = number();
  if (maxval != 255) throw FormatError("only maxval 255 is supported");
  if (w == 0 || h == 0) throw FormatError("empty PGM image");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError("malformed PGM header");
  }
  ++pos;
  if (bytes.size() - pos < w * h) throw FormatError("truncated PGM payload");
  Grid g(h, w);
  for (std::size_t i = 0; i < w * h; ++i) g.data[i] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
  return g;
}

inline Grid load_grayscale(const std::string& path) { return decode_pgm(read_file(path)); }

inline std::uint8_t to_byte(double unit) {
  const double x = std::round(unit * 255.0);
  return static_cast<std::uint8_t>(std::clamp(std::isfinite(x) ? x : 0.0, 0.0, 255.0));
}

inline std::string encode_pgm(const Grid& g) {
  std::string out = "P5\n" + std::to_string(g.cols) + " " + std::to_string(g.rows) + "\n255\n";
  for (double x : g.data) out.push_back(static_cast<char>(to_byte(x)));
  return out;
}

/// Writes pixels in [0, 1]; values outside are clamped.
inline void save_grayscale(const Grid& g, const std::string& path) { write_file(path, encode_pgm(g)); }

/// Normalization statistics of a texture.
struct NormStats {
  double mean = 0.0;
  double std = 1.0;
};

inline Grid denormalize(const Grid& g, const NormStats& s) {
  Grid out = g;
  for (auto& x : out.data) x = x * s.std + s.mean;
  return out;
}

inline Grid normalize(const Grid& g, const NormStats& s) {
  Grid out = g;
  for (auto& x : out.data) x = (x - s.mean) / s.std;
  return out;
}

/// Inverts the normalization, clamps to the 8-bit range and writes a P5 file.
inline void save_image(const Grid& g, const NormStats& s, const std::string& path) {
  save_grayscale(denormalize(g, s), path);
}

/// Bilinear resampling with pixel-centre alignment.
inline Grid resize_bilinear(const Grid& src, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw DimensionError("resize target is empty");
  Grid out(rows, cols);
  const double sy = static_cast<double>(src.rows) / static_cast<double>(rows);
  const double sx = static_cast<double>(src.cols) / static_cast<double>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.rows - 1));
    const auto y0 = static_cast<std::size_t>(std::floor(y));
    const std::size_t y1 = std::min(y0 + 1, src.rows - 1);
    const double fy = y - static_cast<double>(y0);
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.cols - 1));
      const auto x0 = static_cast<std::size_t>(std::floor(x));
      const std::size_t x1 = std::min(x0 + 1, src.cols - 1);
      const double fx = x - static_cast<double>(x0);
      out(r, c) = (1 - fy) * ((1 - fx) * src(y0, x0) + fx * src(y0, x1)) + fy * ((1 - fx) * src(y1, x0) + fx * src(y1, x1));
    }
  }
  return out;
}

struct TextureDataset {
  std::string name;
  Grid train;  // top half, normalized
  Grid test;   // bottom half, normalized with the training statistics
  NormStats stats;
  std::size_t source_rows = 0;
  std::size_t source_cols = 0;
};

/// Rescales so the image is `target` rows tall (aspect kept), splits it into
/// top and bottom halves and normalizes both with the top half's statistics.
inline TextureDataset preprocess(const Grid& image, std::size_t target, const std::string& name = "texture") {
  if (target == 0 || target > image.rows) throw DimensionError("target size must lie in [1, source rows]");
  const auto cols = static_cast<std::size_t>(
      std::llround(static_cast<double>(image.cols) * static_cast<double>(target) / static_cast<double>(image.rows)));
  const Grid scaled = (target == image.rows) ? image : resize_bilinear(image, target, cols);
  const std::size_t half = scaled.rows / 2;
  if (half == 0) throw DimensionError("image too small to split");
  TextureDataset d;
  d.name = name;
  d.source_rows = image.rows;
  d.source_cols = image.cols;
  const Grid top = scaled.crop(0, 0, half, scaled.cols);
  const Grid bottom = scaled.crop(half, 0, scaled.rows - half, scaled.cols);
  double mean = 0.0;
  for (double x : top.data) mean += x;
  mean /= static_cast<double>(top.size());
  double var = 0.0;
  for (double x : top.data) var += (x - mean) * (x - mean);
  var /= static_cast<double>(top.size());
  if (!(std::sqrt(var) > 1e-8)) throw FormatError("texture '" + name + "' has no contrast (constant image)");
  d.stats = {mean, std::sqrt(var)};
  d.train = normalize(top, d.stats);
  d.test = normalize(bottom, d.stats);
  return d;
}

/// Top-left corner drawn uniformly from every valid position.
inline std::size_t uniform_index(std::size_t n, Rng& rng) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

inline Grid random_crop(const Grid& src, std::size_t size, Rng& rng) {
  if (size > src.rows || size > src.cols) throw DimensionError("patch larger than source image");
  const std::size_t r = uniform_index(src.rows - size + 1, rng);
  const std::size_t c = uniform_index(src.cols - size + 1, rng);
  return src.crop(r, c, size, size);
}

/// `count` random size x size patches from the training half.
inline std::vector<Grid> sample_patches(const TextureDataset& d, std::size_t size, std::size_t count, Rng& rng,
                                        std::size_t kernel, std::size_t tilings) {
  if (!valid_tiled_size(size, kernel, tilings)) throw DimensionError("patch size does not fit the tiling");
  if (size > d.train.rows || size > d.train.cols) throw DimensionError("patch larger than the training half");
  std::vector<Grid> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_crop(d.train, size, rng));
  return out;
}

// ----------------------------------------------------------- dataset cache --

inline constexpr std::string_view kDatasetMagic{"SSDAT\x01", 6};

inline std::string encode_dataset(const TextureDataset& d) {
  bin::Writer w;
  w.bytes(kDatasetMagic);
  w.str(d.name);
  w.f64(d.stats.mean);
  w.f64(d.stats.std);
  w.u64(d.source_rows);
  w.u64(d.source_cols);
  for (const Grid* g : {&d.train, &d.test}) {
    w.u64(g->rows);
    w.u64(g->cols);
    for (double x : g->data) w.f64(x);
  }
  return w.data();
}

inline TextureDataset decode_dataset(const std::string& bytes) {
  bin::Reader r(bytes);
  if (bytes.size() < kDatasetMagic.size() || r.bytes(kDatasetMagic.size()) != kDatasetMagic) {
    throw VersionError("not a dataset cache or unsupported version");
  }
  TextureDataset d;
  d.name = r.str();
  d.stats.mean = r.f64();
  d.stats.std = r.f64();
  d.source_rows = r.u64();
  d.source_cols = r.u64();
  for (Grid* g : {&d.train, &d.test}) {
    const std::uint64_t rows = r.u64(), cols = r.u64();
    if (rows * cols > bytes.size()) throw FormatError("dataset grid size exceeds file");
    *g = Grid(rows, cols);
    for (auto& x : g->data) x = r.f64();
  }
  if (!r.done()) throw FormatError("trailing bytes in dataset cache");
  return d;
}

inline void save_dataset(const TextureDataset& d, const std::string& path) { write_file(path, encode_dataset(d)); }
inline TextureDataset load_dataset(const std::string& path) { return decode_dataset(read_file(path)); }

}  // namespace tssrbm
