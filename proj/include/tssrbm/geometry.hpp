#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace tssrbm {

/// Diagonal tiled-convolution layout over a square image.
///
/// Tiling t places copies of its filters on a stride-k lattice whose origin is
/// the pixel (t, t); within a tiling the receptive fields never overlap. Hidden
/// units are enumerated as (tiling, filter, row, col), row-major, which is also
/// the layout of the "maps" consumed by the layer above (map index t*F + f).
struct TiledGeometry {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t kernel = 11;
  std::size_t num_tilings = 11;
  std::size_t filters_per_tiling = 32;
  std::size_t positions = 0;  // M, per axis, identical for every tiling

  std::size_t num_filters() const { return num_tilings * filters_per_tiling; }
  std::size_t num_units() const { return num_filters() * positions * positions; }
  std::size_t num_pixels() const { return height * width; }
  /// Distinct (tiling, row, col) receptive fields.
  std::size_t num_fields() const { return num_tilings * positions * positions; }

  std::size_t unit_index(std::size_t t, std::size_t f, std::size_t r, std::size_t c) const {
    return ((t * filters_per_tiling + f) * positions + r) * positions + c;
  }
  std::size_t field_index(std::size_t t, std::size_t r, std::size_t c) const {
    return (t * positions + r) * positions + c;
  }
  /// Top (or left) pixel coordinate of the field at lattice position p of tiling t.
  std::size_t field_origin(std::size_t t, std::size_t p) const { return t + p * kernel; }

  /// Pixel indices (row-major) covered by the given unit.
  std::vector<std::size_t> covered_pixels(std::size_t unit) const {
    const std::size_t per_map = positions * positions;
    const std::size_t map = unit / per_map;
    const std::size_t t = map / filters_per_tiling;
    const std::size_t r = (unit % per_map) / positions;
    const std::size_t c = unit % positions;
    std::vector<std::size_t> out;
    out.reserve(kernel * kernel);
    for (std::size_t a = 0; a < kernel; ++a) {
      for (std::size_t b = 0; b < kernel; ++b) {
        out.push_back((field_origin(t, r) + a) * width + field_origin(t, c) + b);
      }
    }
    return out;
  }
};

inline TiledGeometry build_tiled_geometry(std::size_t height, std::size_t width, std::size_t kernel,
                                          std::size_t tilings, std::size_t filters) {
  if (height != width) throw DimensionError("only square images are supported");
  if (kernel == 0 || tilings == 0 || filters == 0) {
    throw DimensionError("kernel, tilings and filters must be positive");
  }
  if (kernel > height) throw DimensionError("kernel larger than image");
  if (tilings > kernel) throw DimensionError("more tilings than kernel pixels");
  if (height + 1 < tilings || (height + 1 - tilings) % kernel != 0) {
    throw DimensionError("image size " + std::to_string(height) + " is not (positions*" +
                         std::to_string(kernel) + " + " + std::to_string(tilings - 1) + ")");
  }
  TiledGeometry g;
  g.height = height;
  g.width = width;
  g.kernel = kernel;
  g.num_tilings = tilings;
  g.filters_per_tiling = filters;
  g.positions = (height + 1 - tilings) / kernel;
  return g;
}

/// Whether `size` admits a tiled geometry for the given kernel and tiling count.
inline bool valid_tiled_size(std::size_t size, std::size_t kernel, std::size_t tilings) {
  return size >= kernel && tilings <= kernel && size + 1 >= tilings &&
         (size + 1 - tilings) % kernel == 0;
}

namespace detail {

inline void check_image(const Grid& image, const TiledGeometry& g) {
  if (image.rows != g.height || image.cols != g.width) {
    throw DimensionError("image dimensions do not match tiled geometry");
  }
}

inline void check_kernels(std::span<const double> kernels, const TiledGeometry& g) {
  if (kernels.size() != g.num_filters() * g.kernel * g.kernel) {
    throw DimensionError("kernel stack size does not match tiled geometry");
  }
}

inline void gather_patch(const Grid& image, const TiledGeometry& g, std::size_t t, std::size_t r,
                         std::size_t c, double* patch) {
  const std::size_t k = g.kernel;
  const std::size_t r0 = g.field_origin(t, r);
  const std::size_t c0 = g.field_origin(t, c);
  for (std::size_t a = 0; a < k; ++a) {
    const double* row = image.data.data() + (r0 + a) * image.cols + c0;
    for (std::size_t b = 0; b < k; ++b) patch[a * k + b] = row[b];
  }
}

}  // namespace detail

/// Per-unit projections v^T W_i, where W_i is unit i's tied kernel placed at
/// its receptive field.
inline std::vector<double> tiled_forward(const Grid& image, std::span<const double> kernels,
                                         const TiledGeometry& g) {
  detail::check_image(image, g);
  detail::check_kernels(kernels, g);
  const std::size_t kk = g.kernel * g.kernel;
  const std::size_t F = g.filters_per_tiling;
  std::vector<double> out(g.num_units());
  std::vector<double> patch(kk);
  for (std::size_t t = 0; t < g.num_tilings; ++t) {
    for (std::size_t r = 0; r < g.positions; ++r) {
      for (std::size_t c = 0; c < g.positions; ++c) {
        detail::gather_patch(image, g, t, r, c, patch.data());
        for (std::size_t f = 0; f < F; ++f) {
          const double* w = kernels.data() + (t * F + f) * kk;
          double acc = 0.0;
          for (std::size_t j = 0; j < kk; ++j) acc += w[j] * patch[j];
          out[g.unit_index(t, f, r, c)] = acc;
        }
      }
    }
  }
  return out;
}

/// Adjoint of tiled_forward: sum_i coeffs_i W_i placed at unit i's field.
inline Grid tiled_adjoint(std::span<const double> coeffs, std::span<const double> kernels,
                          const TiledGeometry& g) {
  detail::check_kernels(kernels, g);
  if (coeffs.size() != g.num_units()) throw DimensionError("coefficient count != unit count");
  const std::size_t k = g.kernel;
  const std::size_t kk = k * k;
  const std::size_t F = g.filters_per_tiling;
  Grid out(g.height, g.width);
  std::vector<double> patch(kk);
  for (std::size_t t = 0; t < g.num_tilings; ++t) {
    for (std::size_t r = 0; r < g.positions; ++r) {
      for (std::size_t c = 0; c < g.positions; ++c) {
        std::fill(patch.begin(), patch.end(), 0.0);
        for (std::size_t f = 0; f < F; ++f) {
          const double a = coeffs[g.unit_index(t, f, r, c)];
          if (a == 0.0) continue;
          const double* w = kernels.data() + (t * F + f) * kk;
          for (std::size_t j = 0; j < kk; ++j) patch[j] += a * w[j];
        }
        const std::size_t r0 = g.field_origin(t, r);
        const std::size_t c0 = g.field_origin(t, c);
        for (std::size_t a = 0; a < k; ++a) {
          double* row = out.data.data() + (r0 + a) * out.cols + c0;
          for (std::size_t b = 0; b < k; ++b) row[b] += patch[a * k + b];
        }
      }
    }
  }
  return out;
}

/// Accumulates sum_i coeffs_i * patch_i into the kernel of each unit i
/// (the kernel-side gradient of <tiled_forward(image), coeffs>).
inline void tiled_kernel_grad(const Grid& image, std::span<const double> coeffs,
                              const TiledGeometry& g, std::span<double> grad) {
  detail::check_image(image, g);
  detail::check_kernels(grad, g);
  if (coeffs.size() != g.num_units()) throw DimensionError("coefficient count != unit count");
  const std::size_t kk = g.kernel * g.kernel;
  const std::size_t F = g.filters_per_tiling;
  std::vector<double> patch(kk);
  for (std::size_t t = 0; t < g.num_tilings; ++t) {
    for (std::size_t r = 0; r < g.positions; ++r) {
      for (std::size_t c = 0; c < g.positions; ++c) {
        detail::gather_patch(image, g, t, r, c, patch.data());
        for (std::size_t f = 0; f < F; ++f) {
          const double a = coeffs[g.unit_index(t, f, r, c)];
          if (a == 0.0) continue;
          double* w = grad.data() + (t * F + f) * kk;
          for (std::size_t j = 0; j < kk; ++j) w[j] += a * patch[j];
        }
      }
    }
  }
}

/// Squared norm of the image restricted to each receptive field, indexed by
/// TiledGeometry::field_index.
inline std::vector<double> field_squared_norms(const Grid& image, const TiledGeometry& g) {
  detail::check_image(image, g);
  const std::size_t k = g.kernel;
  std::vector<double> out(g.num_fields());
  for (std::size_t t = 0; t < g.num_tilings; ++t) {
    for (std::size_t r = 0; r < g.positions; ++r) {
      for (std::size_t c = 0; c < g.positions; ++c) {
        double acc = 0.0;
        const std::size_t r0 = g.field_origin(t, r);
        const std::size_t c0 = g.field_origin(t, c);
        for (std::size_t a = 0; a < k; ++a) {
          const double* row = image.data.data() + (r0 + a) * image.cols + c0;
          for (std::size_t b = 0; b < k; ++b) acc += row[b] * row[b];
        }
        out[g.field_index(t, r, c)] = acc;
      }
    }
  }
  return out;
}

/// Adds value_f to every pixel of field f (indexed by field_index).
inline void add_to_fields(std::span<const double> field_values, const TiledGeometry& g, Grid& image) {
  detail::check_image(image, g);
  const std::size_t k = g.kernel;
  for (std::size_t t = 0; t < g.num_tilings; ++t) {
    for (std::size_t r = 0; r < g.positions; ++r) {
      for (std::size_t c = 0; c < g.positions; ++c) {
        const double v = field_values[g.field_index(t, r, c)];
        if (v == 0.0) continue;
        const std::size_t r0 = g.field_origin(t, r);
        const std::size_t c0 = g.field_origin(t, c);
        for (std::size_t a = 0; a < k; ++a) {
          double* row = image.data.data() + (r0 + a) * image.cols + c0;
          for (std::size_t b = 0; b < k; ++b) row[b] += v;
        }
      }
    }
  }
}

/// Plain convolutional sharing, stride 1, valid coverage. Input is a stack of
/// square maps; every output unit reads the same kernel window from all of them.
struct ConvGeometry {
  std::size_t input_maps = 0;
  std::size_t map_size = 0;
  std::size_t kernel = 2;
  std::size_t output_filters = 0;
  std::size_t out_size = 0;

  std::size_t num_inputs() const { return input_maps * map_size * map_size; }
  std::size_t num_outputs() const { return output_filters * out_size * out_size; }
  std::size_t kernel_size() const { return output_filters * input_maps * kernel * kernel; }
};

inline ConvGeometry build_conv_geometry(std::size_t input_maps, std::size_t map_size,
                                        std::size_t kernel, std::size_t filters) {
  if (input_maps == 0 || filters == 0 || kernel == 0) {
    throw DimensionError("conv geometry needs positive maps, filters and kernel");
  }
  if (kernel > map_size) throw DimensionError("conv kernel larger than input map");
  return ConvGeometry{input_maps, map_size, kernel, filters, map_size - kernel + 1};
}

namespace detail {
inline void check_conv(std::span<const double> kernels, const ConvGeometry& g) {
  if (kernels.size() != g.kernel_size()) throw DimensionError("conv kernel size mismatch");
}
}  // namespace detail

/// Valid-mode cross-correlation summed over all input maps.
/// Kernel layout: [filter][input map][row][col].
inline std::vector<double> conv_forward(std::span<const double> maps, std::span<const double> kernels,
                                        const ConvGeometry& g) {
  detail::check_conv(kernels, g);
  if (maps.size() != g.num_inputs()) throw DimensionError("conv input size mismatch");
  const std::size_t S = g.map_size, O = g.out_size, K = g.kernel;
  std::vector<double> out(g.num_outputs(), 0.0);
  for (std::size_t j = 0; j < g.output_filters; ++j) {
    double* o = out.data() + j * O * O;
    for (std::size_t c = 0; c < g.input_maps; ++c) {
      const double* in = maps.data() + c * S * S;
      const double* w = kernels.data() + (j * g.input_maps + c) * K * K;
      for (std::size_t a = 0; a < K; ++a) {
        for (std::size_t b = 0; b < K; ++b) {
          const double wv = w[a * K + b];
          if (wv == 0.0) continue;
          for (std::size_t y = 0; y < O; ++y) {
            const double* src = in + (y + a) * S + b;
            double* dst = o + y * O;
            for (std::size_t x = 0; x < O; ++x) dst[x] += wv * src[x];
          }
        }
      }
    }
  }
  return out;
}

inline std::vector<double> conv_adjoint(std::span<const double> coeffs, std::span<const double> kernels,
                                        const ConvGeometry& g) {
  detail::check_conv(kernels, g);
  if (coeffs.size() != g.num_outputs()) throw DimensionError("conv coefficient size mismatch");
  const std::size_t S = g.map_size, O = g.out_size, K = g.kernel;
  std::vector<double> out(g.num_inputs(), 0.0);
  for (std::size_t j = 0; j < g.output_filters; ++j) {
    const double* o = coeffs.data() + j * O * O;
    for (std::size_t c = 0; c < g.input_maps; ++c) {
      double* in = out.data() + c * S * S;
      const double* w = kernels.data() + (j * g.input_maps + c) * K * K;
      for (std::size_t a = 0; a < K; ++a) {
        for (std::size_t b = 0; b < K; ++b) {
          const double wv = w[a * K + b];
          if (wv == 0.0) continue;
          for (std::size_t y = 0; y < O; ++y) {
            double* dst = in + (y + a) * S + b;
            const double* src = o + y * O;
            for (std::size_t x = 0; x < O; ++x) dst[x] += wv * src[x];
          }
        }
      }
    }
  }
  return out;
}

/// Accumulates d<conv_forward(maps), coeffs>/d kernels into grad.
inline void conv_kernel_grad(std::span<const double> maps, std::span<const double> coeffs,
                             const ConvGeometry& g, std::span<double> grad) {
  detail::check_conv(grad, g);
  if (maps.size() != g.num_inputs() || coeffs.size() != g.num_outputs()) {
    throw DimensionError("conv gradient size mismatch");
  }
  const std::size_t S = g.map_size, O = g.out_size, K = g.kernel;
  for (std::size_t j = 0; j < g.output_filters; ++j) {
    const double* o = coeffs.data() + j * O * O;
    for (std::size_t c = 0; c < g.input_maps; ++c) {
      const double* in = maps.data() + c * S * S;
      double* w = grad.data() + (j * g.input_maps + c) * K * K;
      for (std::size_t a = 0; a < K; ++a) {
        for (std::size_t b = 0; b < K; ++b) {
          double acc = 0.0;
          for (std::size_t y = 0; y < O; ++y) {
            const double* src = in + (y + a) * S + b;
            const double* co = o + y * O;
            for (std::size_t x = 0; x < O; ++x) acc += co[x] * src[x];
          }
          w[a * K + b] += acc;
        }
      }
    }
  }
}

}  // namespace tssrbm
