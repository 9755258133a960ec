#include <gtest/gtest.h>

#include <tssrbm/metrics.hpp>
#include <tssrbm/random.hpp>

#include <cmath>
#include <random>
#include <sstream>

using namespace tssrbm;

namespace {

Grid gaussian(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Grid g(r, c);
  for (auto& x : g.data) x = normal(rng);
  return g;
}

Grid stripes(std::size_t n, double period, double phase = 0.0) {
  Grid g(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) g(r, c) = std::sin(6.283185307179586 * static_cast<double>(c) / period + phase);
  }
  return g;
}

}  // namespace

TEST(Ncc, SelfAndNegation) {
  const Grid x = gaussian(5, 5, 1);
  Grid neg = x;
  for (auto& v : neg.data) v = -v;
  EXPECT_NEAR(ncc(x, x), 1.0, 1e-15);
  EXPECT_NEAR(ncc(x, neg), -1.0, 1e-15);
}

TEST(Ncc, HandComputedPair) {
  Grid a(1, 3), b(1, 3);
  a.data = {1.0, 2.0, 3.0};
  b.data = {-1.0, 0.5, 2.0};
  // 1*-1 + 2*0.5 + 3*2 = 6; |a| = sqrt(14); |b| = sqrt(5.25)
  EXPECT_NEAR(ncc(a, b), 6.0 / std::sqrt(14.0 * 5.25), 1e-12);
}

TEST(Ncc, Errors) {
  EXPECT_THROW(ncc(Grid(2, 2), gaussian(2, 2, 1)), DegenerateInputError);
  EXPECT_THROW(ncc(gaussian(2, 3, 1), gaussian(3, 2, 1)), DimensionError);
}

TEST(Tss, ExactWindowScoresOne) {
  const Grid region = gaussian(40, 60, 4);
  Grid sample(25, 25);
  // Centre 19x19 of the sample equals the region window at (7, 30).
  for (std::size_t r = 0; r < 19; ++r) {
    for (std::size_t c = 0; c < 19; ++c) sample(3 + r, 3 + c) = region(7 + r, 30 + c);
  }
  EXPECT_NEAR(tss(sample, region), 1.0, 1e-12);
}

TEST(Tss, MatchesBruteForceAndScaleInvariant) {
  const Grid region = gaussian(30, 30, 5);
  const Grid sample = gaussian(21, 21, 6);
  const Grid centre = sample.crop(1, 1, 19, 19);
  double best = -1.0;
  for (std::size_t r = 0; r + 19 <= 30; ++r) {
    for (std::size_t c = 0; c + 19 <= 30; ++c) best = std::max(best, ncc(centre, region.crop(r, c, 19, 19)));
  }
  EXPECT_NEAR(tss(sample, region), best, 1e-12);
  Grid scaled = sample;
  for (auto& v : scaled.data) v *= 3.7;
  EXPECT_NEAR(tss(scaled, region), best, 1e-12);
}

TEST(Tss, NoiseAgainstStripesIsLow) {
  const double noise = tss(gaussian(19, 19, 7), stripes(60, 8.0));
  // Phase of three pixels: some window lines up exactly.
  const double match = tss(stripes(30, 8.0, 3 * 6.283185307179586 / 8), stripes(60, 8.0));
  std::cout << "[ baseline ] noise TSS on stripes: " << noise << '\n';
  EXPECT_LT(noise, 0.5);
  EXPECT_NEAR(match, 1.0, 1e-12);
}

TEST(Tss, Errors) {
  EXPECT_THROW(tss(Grid(19, 19), gaussian(30, 30, 1)), DegenerateInputError);
  EXPECT_THROW(tss(gaussian(10, 10, 1), gaussian(30, 30, 1)), DimensionError);
  EXPECT_THROW(tss(gaussian(19, 19, 1), gaussian(10, 30, 1)), DimensionError);
}

TEST(Mssim, IdentityAndSymmetry) {
  const Grid x = gaussian(30, 30, 1), y = gaussian(30, 30, 2);
  EXPECT_NEAR(mssim(x, x), 1.0, 1e-12);
  EXPECT_NEAR(mssim(x, y), mssim(y, x), 1e-12);
  EXPECT_LT(mssim(x, y), 0.5);
}

TEST(Mssim, ConstantImagesClosedForm) {
  // Zero variance everywhere: SSIM reduces to the luminance term.
  const double a = 100.0, b = 140.0, L = 255.0;
  const double c1 = (0.01 * L) * (0.01 * L);
  EXPECT_NEAR(mssim(Grid(15, 15, a), Grid(15, 15, b), L), (2 * a * b + c1) / (a * a + b * b + c1), 1e-12);
}

TEST(Mssim, RangeOnNonNegativeImages) {
  Grid x = gaussian(20, 20, 3), y = gaussian(20, 20, 4);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x.data[i] = 128 + 30 * x.data[i];
    y.data[i] = 128 + 30 * (0.7 * x.data[i] / 30 + 0.3 * y.data[i]);
  }
  const double s = mssim(x, y);
  EXPECT_GT(s, 0.0);
  EXPECT_LT(s, 1.0);
}

TEST(Mssim, Errors) {
  EXPECT_THROW(mssim(Grid(10, 10), Grid(10, 10)), DimensionError);
  EXPECT_THROW(mssim(Grid(12, 12), Grid(12, 13)), DimensionError);
}

TEST(Autocorr, LagZeroAndIidBound) {
  const std::size_t T = 2000;
  std::vector<Grid> chain;
  for (std::size_t t = 0; t < T; ++t) chain.push_back(gaussian(3, 3, 100 + t));
  const auto r = autocorr_spectrum(chain, 20);
  ASSERT_EQ(r.size(), 21u);
  EXPECT_EQ(r[0], 1.0);
  for (std::size_t tau = 1; tau <= 20; ++tau) EXPECT_LT(std::abs(r[tau]), 4.0 / std::sqrt(static_cast<double>(T)));
}

TEST(Autocorr, Errors) {
  EXPECT_THROW(autocorr_spectrum(std::vector<Grid>(5, Grid(2, 2, 1.0)), 2), DegenerateInputError);
  EXPECT_THROW(autocorr_spectrum(std::vector<Grid>(5, Grid(2, 2)), 5), ConfigError);
}

TEST(Autocorr, Ar1DecayAndThinning) {
  const std::size_t T = 60000, thin = 3;
  const double a = 0.8;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::vector<Grid> chain;
  Grid x(1, 2);
  for (std::size_t t = 0; t < T; ++t) {
    for (auto& v : x.data) v = a * v + normal(rng);
    chain.push_back(x);
  }
  const auto r = autocorr_spectrum(chain, 6);
  for (std::size_t tau = 1; tau <= 6; ++tau) EXPECT_NEAR(r[tau], std::pow(a, static_cast<double>(tau)), 0.02);
  std::vector<Grid> thinned;
  for (std::size_t t = 0; t < T; t += thin) thinned.push_back(chain[t]);
  EXPECT_NEAR(autocorr_spectrum(thinned, 1)[1], r[thin], 0.02);
}

TEST(Report, MeanStdAndRow) {
  const auto rep = MetricReport::from("D6", "tssrbm", "tss", {0.9, 0.95, 0.85, 1.0});
  EXPECT_NEAR(rep.mean, 0.925, 1e-12);
  EXPECT_NEAR(rep.std, std::sqrt((0.025 * 0.025 * 2 + 0.075 * 0.075 * 2) / 3.0), 1e-12);
  std::ostringstream out;
  write_metric_row(out, rep);
  EXPECT_EQ(out.str().substr(0, 15), "D6\ttssrbm\ttss\t0");
  EXPECT_EQ(out.str().back(), '\n');
  EXPECT_EQ(out.str().substr(out.str().size() - 3), "\t4\n");
  EXPECT_EQ(std::string(kMetricHeader), "texture\tmodel\tmetric\tmean\tstd\tn");
}
