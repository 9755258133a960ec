#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace tssrbm {

/// A parameter set exposes its arrays as named spans; scalars appear as
/// one-element spans. Gradients and velocities reuse the same type.
template <class P>
concept ParamSet = requires(P& p, const P& cp) {
  p.visit([](std::string_view, std::span<double>) {});
  cp.visit([](std::string_view, std::span<const double>) {});
};

template <ParamSet P>
P zeros_like(const P& p) {
  P z = p;
  z.visit([](std::string_view, std::span<double> a) { std::fill(a.begin(), a.end(), 0.0); });
  return z;
}

namespace detail {
template <ParamSet P, class Fn>
void zip_arrays(P& y, const P& x, Fn&& fn) {
  std::vector<std::span<const double>> xs;
  x.visit([&](std::string_view, std::span<const double> a) { xs.push_back(a); });
  std::size_t i = 0;
  y.visit([&](std::string_view, std::span<double> a) {
    if (i >= xs.size() || xs[i].size() != a.size()) {
      throw DimensionError("parameter sets have different shapes");
    }
    fn(a, xs[i++]);
  });
}
}  // namespace detail

/// y += a * x
template <ParamSet P>
void axpy(P& y, double a, const P& x) {
  detail::zip_arrays(y, x, [a](std::span<double> dst, std::span<const double> src) {
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += a * src[j];
  });
}

template <ParamSet P>
void scale(P& y, double a) {
  y.visit([a](std::string_view, std::span<double> v) {
    for (auto& e : v) e *= a;
  });
}

template <ParamSet P>
double squared_norm(const P& p) {
  double acc = 0.0;
  p.visit([&](std::string_view, std::span<const double> v) {
    for (double e : v) acc += e * e;
  });
  return acc;
}

template <ParamSet P>
bool all_finite(const P& p) {
  bool ok = true;
  p.visit([&](std::string_view, std::span<const double> v) {
    for (double e : v) ok = ok && std::isfinite(e);
  });
  return ok;
}

}  // namespace tssrbm
