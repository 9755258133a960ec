#pragma once

// Exact reference computations for tiny models. Everything here works on
// dense parameter matrices and generic Gaussian algebra (Cholesky, solves,
// log-determinants) so it shares no code path with the tiled or convolutional
// samplers it is used to check.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"

namespace tssrbm::oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Upper bound on enumerated binary units per model (2^14 configurations).
inline constexpr int kMaxBinaryUnits = 14;

/// First-layer ssRBM without weight sharing. phi_support(d, i) = 1 where
/// unit i's gated precision acts on pixel d.
struct DenseSsRbm {
  MatrixXd W;            // D x N
  MatrixXd phi_support;  // D x N
  VectorXd b, mu, alpha, phi;
  double lambda = 1.0;

  Eigen::Index visible() const { return W.rows(); }
  Eigen::Index hidden() const { return W.cols(); }
};

/// Second-layer model over (s, h) with binary g. U is N x M.
struct DenseSsVisRbm {
  MatrixXd U;
  VectorXd alpha, mu, b;  // N
  VectorXd rho;           // M
  bool bias_shift = true;

  Eigen::Index visible() const { return U.rows(); }
  Eigen::Index hidden() const { return U.cols(); }
};

/// Binary-binary RBM. W is V x H.
struct DenseBinaryRbm {
  MatrixXd W;
  VectorXd vbias, hbias;

  Eigen::Index visible() const { return W.rows(); }
  Eigen::Index hidden() const { return W.cols(); }
};

using TinyModelSpec = std::variant<DenseSsRbm, DenseSsVisRbm, DenseBinaryRbm>;

inline double log_sum_exp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

/// All 2^n binary vectors; bit i of the index is element i.
inline std::vector<VectorXd> binary_configs(int n) {
  if (n > kMaxBinaryUnits) throw DimensionError("too many binary units to enumerate");
  std::vector<VectorXd> out;
  out.reserve(std::size_t{1} << n);
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = (mask >> i) & 1U ? 1.0 : 0.0;
    out.push_back(std::move(x));
  }
  return out;
}

inline std::size_t config_index(const VectorXd& x) {
  std::size_t mask = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] > 0.5) mask |= std::size_t{1} << i;
  }
  return mask;
}

/// Unnormalized density exp(-(1/2 x^T A x - c^T x + kappa)).
struct GaussianBlock {
  MatrixXd A;
  VectorXd c;
  double kappa = 0.0;
};

/// log of the integral of the block over R^n.
inline double log_gaussian_integral(const GaussianBlock& g) {
  const Eigen::Index n = g.A.rows();
  if (n == 0) return -g.kappa;
  Eigen::LLT<MatrixXd> llt(g.A);
  if (llt.info() != Eigen::Success) throw ImproperModelError("Gaussian block is not positive definite");
  const MatrixXd L = llt.matrixL();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(L(i, i) > 0.0)) throw ImproperModelError("Gaussian block is not positive definite");
    logdet += 2.0 * std::log(L(i, i));
  }
  const VectorXd y = llt.solve(g.c);
  return -g.kappa + 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) - 0.5 * logdet +
         0.5 * g.c.dot(y);
}

struct GaussianMoments {
  VectorXd mean;
  MatrixXd cov;
};

inline GaussianMoments gaussian_moments(const GaussianBlock& g) {
  Eigen::LLT<MatrixXd> llt(g.A);
  if (llt.info() != Eigen::Success) throw ImproperModelError("Gaussian block is not positive definite");
  GaussianMoments m;
  m.mean = llt.solve(g.c);
  m.cov = llt.solve(MatrixXd::Identity(g.A.rows(), g.A.cols()));
  return m;
}

/// Probabilists' Gauss-Hermite rule (weight = standard normal density) by
/// the Golub-Welsch eigenvalue method. Weights sum to one.
struct QuadratureRule {
  VectorXd nodes;
  VectorXd weights;
};

inline QuadratureRule gauss_hermite(int n) {
  MatrixXd J = MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    J(i, i - 1) = std::sqrt(static_cast<double>(i));
    J(i - 1, i) = J(i, i - 1);
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(J);
  QuadratureRule r;
  r.nodes = es.eigenvalues();
  r.weights = es.eigenvectors().row(0).transpose().array().square();
  return r;
}

/// E[f(x)] for x ~ N(mean, cov), by a tensor Gauss-Hermite rule in whitened
/// coordinates. Exact for polynomials of per-coordinate degree <= 2n - 1.
inline VectorXd gaussian_expectation(const GaussianMoments& m, int nodes,
                                     const std::function<VectorXd(const VectorXd&)>& f) {
  const Eigen::Index d = m.mean.size();
  if (d == 0) return f(m.mean);
  Eigen::LLT<MatrixXd> llt(m.cov);
  const MatrixXd L = llt.matrixL();
  const QuadratureRule rule = gauss_hermite(nodes);
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  VectorXd acc;
  VectorXd z(d);
  while (true) {
    double w = 1.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      z[j] = rule.nodes[idx[static_cast<std::size_t>(j)]];
      w *= rule.weights[idx[static_cast<std::size_t>(j)]];
    }
    const VectorXd val = f(m.mean + L * z);
    if (acc.size() == 0) acc = VectorXd::Zero(val.size());
    acc += w * val;
    std::size_t j = 0;
    while (j < idx.size() && ++idx[j] == nodes) idx[j++] = 0;
    if (j == idx.size()) break;
  }
  return acc;
}

/// Central differences of a scalar function, step eps in every coordinate.
inline VectorXd central_difference(const std::function<double(const VectorXd&)>& f, const VectorXd& theta,
                                   double eps = 1e-5) {
  VectorXd grad(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    VectorXd up = theta, down = theta;
    up[i] += eps;
    down[i] -= eps;
    grad[i] = (f(up) - f(down)) / (2.0 * eps);
  }
  return grad;
}

// ---------------------------------------------------------------- ssRBM --

inline void validate(const DenseSsRbm& m) {
  const Eigen::Index n = m.hidden();
  if (n > kMaxBinaryUnits) throw DimensionError("too many spike units to enumerate");
  if (m.b.size() != n || m.mu.size() != n || m.alpha.size() != n || m.phi.size() != n ||
      m.phi_support.rows() != m.visible() || m.phi_support.cols() != n) {
    throw DimensionError("dense ssRBM arrays have inconsistent sizes");
  }
}

inline VectorXd visible_precision(const DenseSsRbm& m, const VectorXd& h) {
  VectorXd p = VectorXd::Constant(m.visible(), m.lambda);
  for (Eigen::Index i = 0; i < m.hidden(); ++i) p += m.phi[i] * h[i] * m.phi_support.col(i);
  return p;
}

/// Dense energy E(v, s, h).
inline double energy(const DenseSsRbm& m, const VectorXd& v, const VectorXd& s, const VectorXd& h) {
  double e = 0.5 * v.dot(visible_precision(m, h).cwiseProduct(v));
  for (Eigen::Index i = 0; i < m.hidden(); ++i) {
    e += -v.dot(m.W.col(i)) * s[i] * h[i] + 0.5 * m.alpha[i] * s[i] * s[i] - m.alpha[i] * m.mu[i] * s[i] * h[i] -
         m.b[i] * h[i] + 0.5 * m.alpha[i] * m.mu[i] * m.mu[i] * h[i];
  }
  return e;
}

/// Joint block over x = (v, s) for fixed h.
inline GaussianBlock joint_block(const DenseSsRbm& m, const VectorXd& h) {
  const Eigen::Index D = m.visible(), N = m.hidden();
  GaussianBlock g;
  g.A = MatrixXd::Zero(D + N, D + N);
  g.A.topLeftCorner(D, D) = visible_precision(m, h).asDiagonal();
  const MatrixXd Wh = m.W * h.asDiagonal();
  g.A.topRightCorner(D, N) = -Wh;
  g.A.bottomLeftCorner(N, D) = -Wh.transpose();
  g.A.bottomRightCorner(N, N) = m.alpha.asDiagonal();
  g.c = VectorXd::Zero(D + N);
  g.c.tail(N) = m.alpha.cwiseProduct(m.mu).cwiseProduct(h);
  g.kappa = -m.b.dot(h) + 0.5 * (m.alpha.array() * m.mu.array().square() * h.array()).sum();
  return g;
}

/// Block over s for fixed (v, h).
inline GaussianBlock slab_block(const DenseSsRbm& m, const VectorXd& v, const VectorXd& h) {
  GaussianBlock g;
  g.A = m.alpha.asDiagonal();
  g.c = h.cwiseProduct(m.W.transpose() * v + m.alpha.cwiseProduct(m.mu));
  g.kappa = 0.5 * v.dot(visible_precision(m, h).cwiseProduct(v)) - m.b.dot(h) +
            0.5 * (m.alpha.array() * m.mu.array().square() * h.array()).sum();
  return g;
}

/// Per-configuration log of the (v, s) integral; index = config_index(h).
inline std::vector<double> log_config_weights(const DenseSsRbm& m) {
  validate(m);
  std::vector<double> out;
  for (const VectorXd& h : binary_configs(static_cast<int>(m.hidden()))) {
    out.push_back(log_gaussian_integral(joint_block(m, h)));
  }
  return out;
}

inline double exact_log_partition(const DenseSsRbm& m) { return log_sum_exp(log_config_weights(m)); }

/// log sum_h int exp(-E(v, s, h)) ds.
inline double log_unnormalized_v(const DenseSsRbm& m, const VectorXd& v) {
  std::vector<double> terms;
  for (const VectorXd& h : binary_configs(static_cast<int>(m.hidden()))) {
    terms.push_back(log_gaussian_integral(slab_block(m, v, h)));
  }
  return log_sum_exp(terms);
}

inline double log_density_v(const DenseSsRbm& m, const VectorXd& v) {
  return log_unnormalized_v(m, v) - exact_log_partition(m);
}

/// Exact marginal density p(v) at each grid point.
inline std::vector<double> exact_marginal_v(const DenseSsRbm& m, const std::vector<VectorXd>& grid) {
  const double logz = exact_log_partition(m);
  std::vector<double> out;
  out.reserve(grid.size());
  for (const VectorXd& v : grid) out.push_back(std::exp(log_unnormalized_v(m, v) - logz));
  return out;
}

/// P(h_i = 1 | v) by enumeration over all spike configurations.
inline VectorXd conditional_h_given_v(const DenseSsRbm& m, const VectorXd& v) {
  const auto configs = binary_configs(static_cast<int>(m.hidden()));
  std::vector<double> logw;
  for (const VectorXd& h : configs) logw.push_back(log_gaussian_integral(slab_block(m, v, h)));
  const double norm = log_sum_exp(logw);
  VectorXd p = VectorXd::Zero(m.hidden());
  for (std::size_t k = 0; k < configs.size(); ++k) p += std::exp(logw[k] - norm) * configs[k];
  return p;
}

/// P(h) over all configurations, indexed by config_index.
inline std::vector<double> spike_marginal_table(const DenseSsRbm& m) {
  std::vector<double> logw = log_config_weights(m);
  const double logz = log_sum_exp(logw);
  for (auto& x : logw) x = std::exp(x - logz);
  return logw;
}

inline GaussianMoments slab_conditional(const DenseSsRbm& m, const VectorXd& v, const VectorXd& h) {
  return gaussian_moments(slab_block(m, v, h));
}

/// p(v | s, h) from the joint block with s fixed.
inline GaussianMoments visible_conditional(const DenseSsRbm& m, const VectorXd& s, const VectorXd& h) {
  const Eigen::Index D = m.visible();
  const GaussianBlock j = joint_block(m, h);
  GaussianBlock g;
  g.A = j.A.topLeftCorner(D, D);
  g.c = j.c.head(D) - j.A.topRightCorner(D, m.hidden()) * s;
  return gaussian_moments(g);
}

/// Per-pixel mean and variance of the model marginal p(v).
inline GaussianMoments visible_marginal_moments(const DenseSsRbm& m) {
  const auto configs = binary_configs(static_cast<int>(m.hidden()));
  const std::vector<double> ph = spike_marginal_table(m);
  const Eigen::Index D = m.visible();
  VectorXd mean = VectorXd::Zero(D);
  MatrixXd second = MatrixXd::Zero(D, D);
  for (std::size_t k = 0; k < configs.size(); ++k) {
    const GaussianMoments g = gaussian_moments(joint_block(m, configs[k]));
    const VectorXd mv = g.mean.head(D);
    mean += ph[k] * mv;
    second += ph[k] * (g.cov.topLeftCorner(D, D) + mv * mv.transpose());
  }
  return {mean, second - mean * mean.transpose()};
}

/// E_model[f(v, s, h)] for f of per-coordinate degree <= 3 in (v, s).
inline VectorXd model_expectation(
    const DenseSsRbm& m, const std::function<VectorXd(const VectorXd&, const VectorXd&, const VectorXd&)>& f) {
  const auto configs = binary_configs(static_cast<int>(m.hidden()));
  const std::vector<double> ph = spike_marginal_table(m);
  const Eigen::Index D = m.visible();
  VectorXd acc;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    const VectorXd& h = configs[k];
    const VectorXd e = gaussian_expectation(gaussian_moments(joint_block(m, h)), 2, [&](const VectorXd& x) {
      return f(x.head(D), x.tail(m.hidden()), h);
    });
    if (acc.size() == 0) acc = VectorXd::Zero(e.size());
    acc += ph[k] * e;
  }
  return acc;
}

/// Mean log-likelihood of the rows of `data` (one visible vector per row).
inline double exact_loglik(const DenseSsRbm& m, const MatrixXd& data) {
  const double logz = exact_log_partition(m);
  double acc = 0.0;
  for (Eigen::Index r = 0; r < data.rows(); ++r) acc += log_unnormalized_v(m, data.row(r).transpose()) - logz;
  return acc / static_cast<double>(data.rows());
}

/// Dense parameters flattened as W (column-major), b, mu, alpha, phi, lambda.
inline VectorXd flatten(const DenseSsRbm& m) {
  const Eigen::Index D = m.visible(), N = m.hidden();
  VectorXd out(D * N + 4 * N + 1);
  out.head(D * N) = Eigen::Map<const VectorXd>(m.W.data(), D * N);
  out.segment(D * N, N) = m.b;
  out.segment(D * N + N, N) = m.mu;
  out.segment(D * N + 2 * N, N) = m.alpha;
  out.segment(D * N + 3 * N, N) = m.phi;
  out[D * N + 4 * N] = m.lambda;
  return out;
}

inline DenseSsRbm unflatten(const DenseSsRbm& shape, const VectorXd& theta) {
  DenseSsRbm m = shape;
  const Eigen::Index D = m.visible(), N = m.hidden();
  m.W = Eigen::Map<const MatrixXd>(theta.data(), D, N);
  m.b = theta.segment(D * N, N);
  m.mu = theta.segment(D * N + N, N);
  m.alpha = theta.segment(D * N + 2 * N, N);
  m.phi = theta.segment(D * N + 3 * N, N);
  m.lambda = theta[D * N + 4 * N];
  return m;
}

/// Gradient of exact_loglik w.r.t. flatten(m), by central differences.
inline VectorXd exact_loglik_grad(const DenseSsRbm& m, const MatrixXd& data, double eps = 1e-5) {
  return central_difference([&](const VectorXd& th) { return exact_loglik(unflatten(m, th), data); }, flatten(m),
                            eps);
}

/// Brute-force log Z on a dense trapezoid grid over (v, s) in [-half_width,
/// half_width]^(D+N). Only sensible for D + N <= 3.
inline double quadrature_log_partition(const DenseSsRbm& m, double half_width, int points) {
  const int D = static_cast<int>(m.visible()), N = static_cast<int>(m.hidden());
  const int dims = D + N;
  const double step = 2.0 * half_width / (points - 1);
  std::vector<double> terms;
  for (const VectorXd& h : binary_configs(N)) {
    std::vector<int> idx(static_cast<std::size_t>(dims), 0);
    double acc = 0.0;
    VectorXd v(D), s(N);
    while (true) {
      double w = 1.0;
      for (int j = 0; j < dims; ++j) {
        const double x = -half_width + step * idx[static_cast<std::size_t>(j)];
        if (j < D) v[j] = x; else s[j - D] = x;
        if (idx[static_cast<std::size_t>(j)] == 0 || idx[static_cast<std::size_t>(j)] == points - 1) w *= 0.5;
      }
      acc += w * std::exp(-energy(m, v, s, h));
      std::size_t j = 0;
      while (j < idx.size() && ++idx[j] == points) idx[j++] = 0;
      if (j == idx.size()) break;
    }
    terms.push_back(std::log(acc * std::pow(step, dims)));
  }
  return log_sum_exp(terms);
}

// --------------------------------------------------- second layer model --

inline void validate(const DenseSsVisRbm& m) {
  const Eigen::Index N = m.visible(), M = m.hidden();
  if (N + M > kMaxBinaryUnits) throw DimensionError("too many binary units to enumerate");
  if (m.alpha.size() != N || m.mu.size() != N || m.b.size() != N || m.rho.size() != M) {
    throw DimensionError("dense second-layer arrays have inconsistent sizes");
  }
}

inline double shift_term(const DenseSsVisRbm& m, const VectorXd& h) {
  return m.bias_shift ? 0.5 * (m.alpha.array() * m.mu.array().square() * h.array()).sum() : 0.0;
}

inline double energy(const DenseSsVisRbm& m, const VectorXd& s, const VectorXd& h, const VectorXd& g) {
  const VectorXd sh = s.cwiseProduct(h);
  return -sh.dot(m.U * g) - m.rho.dot(g) + 0.5 * (m.alpha.array() * s.array().square()).sum() -
         (m.alpha.array() * m.mu.array() * sh.array()).sum() - m.b.dot(h) + shift_term(m, h);
}

/// Block over s for fixed (h, g).
inline GaussianBlock slab_block(const DenseSsVisRbm& m, const VectorXd& h, const VectorXd& g) {
  GaussianBlock b;
  b.A = m.alpha.asDiagonal();
  b.c = h.cwiseProduct(m.U * g + m.alpha.cwiseProduct(m.mu));
  b.kappa = -m.rho.dot(g) - m.b.dot(h) + shift_term(m, h);
  return b;
}

/// log of the s-integral for every (h, g); index = config_index(h) + 2^N config_index(g).
inline std::vector<double> log_config_weights(const DenseSsVisRbm& m) {
  validate(m);
  const auto hs = binary_configs(static_cast<int>(m.visible()));
  const auto gs = binary_configs(static_cast<int>(m.hidden()));
  std::vector<double> out;
  out.reserve(hs.size() * gs.size());
  for (const VectorXd& g : gs) {
    for (const VectorXd& h : hs) out.push_back(log_gaussian_integral(slab_block(m, h, g)));
  }
  return out;
}

inline double exact_log_partition(const DenseSsVisRbm& m) { return log_sum_exp(log_config_weights(m)); }

/// P(h, g) indexed as in log_config_weights.
inline std::vector<double> joint_spike_table(const DenseSsVisRbm& m) {
  std::vector<double> w = log_config_weights(m);
  const double z = log_sum_exp(w);
  for (auto& x : w) x = std::exp(x - z);
  return w;
}

inline VectorXd conditional_g_given_sh(const DenseSsVisRbm& m, const VectorXd& s, const VectorXd& h) {
  const auto gs = binary_configs(static_cast<int>(m.hidden()));
  std::vector<double> logw;
  for (const VectorXd& g : gs) logw.push_back(-energy(m, s, h, g));
  const double norm = log_sum_exp(logw);
  VectorXd p = VectorXd::Zero(m.hidden());
  for (std::size_t k = 0; k < gs.size(); ++k) p += std::exp(logw[k] - norm) * gs[k];
  return p;
}

inline VectorXd conditional_h_given_g(const DenseSsVisRbm& m, const VectorXd& g) {
  const auto hs = binary_configs(static_cast<int>(m.visible()));
  std::vector<double> logw;
  for (const VectorXd& h : hs) logw.push_back(log_gaussian_integral(slab_block(m, h, g)));
  const double norm = log_sum_exp(logw);
  VectorXd p = VectorXd::Zero(m.visible());
  for (std::size_t k = 0; k < hs.size(); ++k) p += std::exp(logw[k] - norm) * hs[k];
  return p;
}

inline GaussianMoments slab_conditional(const DenseSsVisRbm& m, const VectorXd& h, const VectorXd& g) {
  return gaussian_moments(slab_block(m, h, g));
}

inline double log_unnormalized_sh(const DenseSsVisRbm& m, const VectorXd& s, const VectorXd& h) {
  std::vector<double> terms;
  for (const VectorXd& g : binary_configs(static_cast<int>(m.hidden()))) terms.push_back(-energy(m, s, h, g));
  return log_sum_exp(terms);
}

/// Mean log-likelihood of (s, h) pairs with binary h.
inline double exact_loglik(const DenseSsVisRbm& m, const MatrixXd& s, const MatrixXd& h) {
  const double logz = exact_log_partition(m);
  double acc = 0.0;
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    acc += log_unnormalized_sh(m, s.row(r).transpose(), h.row(r).transpose()) - logz;
  }
  return acc / static_cast<double>(s.rows());
}

/// E_model[f(s, h, g)] for f of per-coordinate degree <= 3 in s.
inline VectorXd model_expectation(
    const DenseSsVisRbm& m, const std::function<VectorXd(const VectorXd&, const VectorXd&, const VectorXd&)>& f) {
  const auto hs = binary_configs(static_cast<int>(m.visible()));
  const auto gs = binary_configs(static_cast<int>(m.hidden()));
  const std::vector<double> p = joint_spike_table(m);
  VectorXd acc;
  std::size_t k = 0;
  for (const VectorXd& g : gs) {
    for (const VectorXd& h : hs) {
      const double w = p[k++];
      const VectorXd e = gaussian_expectation(gaussian_moments(slab_block(m, h, g)), 2,
                                              [&](const VectorXd& s) { return f(s, h, g); });
      if (acc.size() == 0) acc = VectorXd::Zero(e.size());
      acc += w * e;
    }
  }
  return acc;
}

/// Flattened as U (column-major), alpha, mu, b, rho.
inline VectorXd flatten(const DenseSsVisRbm& m) {
  const Eigen::Index N = m.visible(), M = m.hidden();
  VectorXd out(N * M + 3 * N + M);
  out.head(N * M) = Eigen::Map<const VectorXd>(m.U.data(), N * M);
  out.segment(N * M, N) = m.alpha;
  out.segment(N * M + N, N) = m.mu;
  out.segment(N * M + 2 * N, N) = m.b;
  out.tail(M) = m.rho;
  return out;
}

inline DenseSsVisRbm unflatten(const DenseSsVisRbm& shape, const VectorXd& theta) {
  DenseSsVisRbm m = shape;
  const Eigen::Index N = m.visible(), M = m.hidden();
  m.U = Eigen::Map<const MatrixXd>(theta.data(), N, M);
  m.alpha = theta.segment(N * M, N);
  m.mu = theta.segment(N * M + N, N);
  m.b = theta.segment(N * M + 2 * N, N);
  m.rho = theta.tail(M);
  return m;
}

inline VectorXd exact_loglik_grad(const DenseSsVisRbm& m, const MatrixXd& s, const MatrixXd& h,
                                  double eps = 1e-5) {
  return central_difference([&](const VectorXd& th) { return exact_loglik(unflatten(m, th), s, h); }, flatten(m),
                            eps);
}

/// Brute-force log Z on a trapezoid grid over s (N <= 2).
inline double quadrature_log_partition(const DenseSsVisRbm& m, double half_width, int points) {
  const int N = static_cast<int>(m.visible());
  const double step = 2.0 * half_width / (points - 1);
  std::vector<double> terms;
  for (const VectorXd& g : binary_configs(static_cast<int>(m.hidden()))) {
    for (const VectorXd& h : binary_configs(N)) {
      std::vector<int> idx(static_cast<std::size_t>(N), 0);
      VectorXd s(N);
      double acc = 0.0;
      while (true) {
        double w = 1.0;
        for (int j = 0; j < N; ++j) {
          s[j] = -half_width + step * idx[static_cast<std::size_t>(j)];
          if (idx[static_cast<std::size_t>(j)] == 0 || idx[static_cast<std::size_t>(j)] == points - 1) w *= 0.5;
        }
        acc += w * std::exp(-energy(m, s, h, g));
        std::size_t j = 0;
        while (j < idx.size() && ++idx[j] == points) idx[j++] = 0;
        if (j == idx.size()) break;
      }
      terms.push_back(std::log(acc * std::pow(step, N)));
    }
  }
  return log_sum_exp(terms);
}

// ------------------------------------------------------- binary RBM --

inline double energy(const DenseBinaryRbm& m, const VectorXd& v, const VectorXd& h) {
  return -v.dot(m.W * h) - m.vbias.dot(v) - m.hbias.dot(h);
}

/// P(v, h) indexed by config_index(v) + 2^V config_index(h).
inline std::vector<double> joint_table(const DenseBinaryRbm& m) {
  if (m.visible() + m.hidden() > kMaxBinaryUnits) throw DimensionError("too many binary units to enumerate");
  const auto vs = binary_configs(static_cast<int>(m.visible()));
  const auto hs = binary_configs(static_cast<int>(m.hidden()));
  std::vector<double> w;
  for (const VectorXd& h : hs) {
    for (const VectorXd& v : vs) w.push_back(-energy(m, v, h));
  }
  const double z = log_sum_exp(w);
  for (auto& x : w) x = std::exp(x - z);
  return w;
}

inline double exact_log_partition(const DenseBinaryRbm& m) {
  const auto vs = binary_configs(static_cast<int>(m.visible()));
  const auto hs = binary_configs(static_cast<int>(m.hidden()));
  std::vector<double> w;
  for (const VectorXd& h : hs) {
    for (const VectorXd& v : vs) w.push_back(-energy(m, v, h));
  }
  return log_sum_exp(w);
}

inline VectorXd conditional_h_given_v(const DenseBinaryRbm& m, const VectorXd& v) {
  const auto hs = binary_configs(static_cast<int>(m.hidden()));
  std::vector<double> w;
  for (const VectorXd& h : hs) w.push_back(-energy(m, v, h));
  const double z = log_sum_exp(w);
  VectorXd p = VectorXd::Zero(m.hidden());
  for (std::size_t k = 0; k < hs.size(); ++k) p += std::exp(w[k] - z) * hs[k];
  return p;
}

inline VectorXd conditional_v_given_h(const DenseBinaryRbm& m, const VectorXd& h) {
  const auto vs = binary_configs(static_cast<int>(m.visible()));
  std::vector<double> w;
  for (const VectorXd& v : vs) w.push_back(-energy(m, v, h));
  const double z = log_sum_exp(w);
  VectorXd p = VectorXd::Zero(m.visible());
  for (std::size_t k = 0; k < vs.size(); ++k) p += std::exp(w[k] - z) * vs[k];
  return p;
}

inline double exact_loglik(const DenseBinaryRbm& m, const MatrixXd& data) {
  const double logz = exact_log_partition(m);
  const auto hs = binary_configs(static_cast<int>(m.hidden()));
  double acc = 0.0;
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    std::vector<double> w;
    for (const VectorXd& h : hs) w.push_back(-energy(m, data.row(r).transpose(), h));
    acc += log_sum_exp(w) - logz;
  }
  return acc / static_cast<double>(data.rows());
}

// -------------------------------------------------------- dispatch --

inline double exact_log_partition(const TinyModelSpec& spec) {
  return std::visit([](const auto& m) { return exact_log_partition(m); }, spec);
}

}  // namespace tssrbm::oracle
