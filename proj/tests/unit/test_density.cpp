#include "efbm/density.hpp"
#include "efbm/errors.hpp"
#include "efbm/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace efbm;

namespace {

std::vector<double> standard_normal(std::size_t n, std::uint64_t seed) {
  RandomStream s(seed, StreamPurpose::synthetic, 0);
  std::vector<double> x(n);
  s.fill_normal(x);
  return x;
}

}  // namespace

TEST(Kde, RecoversStandardNormal) {
  const auto x = standard_normal(100000, 1);
  const auto d = kde_log_domain(x, 0.0, {std::nullopt, 1024, 100, 1, 50});
  double worst = 0.0;
  for (std::size_t j = 0; j < d.grid.size(); ++j) {
    const double z = d.grid[j];
    if (std::abs(z) > 2.0) continue;
    const double ref = std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi);
    worst = std::max(worst, std::abs(d.density[j] - ref));
  }
  EXPECT_LT(worst, 0.01);
  EXPECT_NEAR(d.integral(), 1.0, 0.01);
  EXPECT_NEAR(d.f_integral(), 1.0, 0.02);
  EXPECT_LE(d.grid.front(), *std::min_element(x.begin(), x.end()) - 3 * d.bandwidth + 1e-12);
  EXPECT_GE(d.grid.back(), *std::max_element(x.begin(), x.end()) + 3 * d.bandwidth - 1e-12);
  EXPECT_EQ(d.bootstrap, 100u);
  for (double s : d.se) EXPECT_GE(s, 0.0);
}

TEST(Kde, InducedDensityInF) {
  const auto x = standard_normal(20000, 2);
  const auto d = kde_log_domain(x, 0.4, {0.1, 512, 20, 1, 50});
  for (std::size_t j = 0; j < d.grid.size(); j += 37) {
    EXPECT_NEAR(d.f_grid[j], std::exp(d.grid[j] + 0.4), 1e-12 * d.f_grid[j]);
    EXPECT_NEAR(d.f_density[j], d.density[j] / d.f_grid[j], 1e-12);
  }
}

TEST(Kde, PointMassAndSampleSize) {
  EXPECT_TRUE(kde_log_domain(std::vector<double>(10000, 0.0), 0.0).point_mass);
  EXPECT_THROW(kde_log_domain(std::vector<double>(100, 0.0), 0.0), DomainError);
}

TEST(Silverman, KnownValue) {
  const auto x = standard_normal(100000, 4);
  EXPECT_NEAR(silverman_bandwidth(x), 0.9 * std::pow(1e5, -0.2), 0.02 * 0.9 * std::pow(1e5, -0.2));
}

TEST(GaussianTail, BoundValues) {
  const ModelParams params;
  const auto x = standard_normal(20000, 3);
  std::vector<double> scaled(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) scaled[i] = 0.5 * x[i];
  const std::vector<double> pts{0.0, -1.0, -3.0};
  const auto r = verify_gaussian_tail(scaled, params, pts);
  ASSERT_GE(r.points.size(), 3u);
  EXPECT_DOUBLE_EQ(r.points[0].rhs, 1.0);
  EXPECT_NEAR(r.points[1].rhs, 0.6065306597126334, 1e-15);
  EXPECT_NEAR(r.points[2].rhs, 0.011108996538242306, 1e-16);
  EXPECT_EQ(r.violations, 0u);
  const std::vector<double> bad{0.5};
  EXPECT_THROW(verify_gaussian_tail(scaled, params, bad), DomainError);
}

TEST(GaussianTail, DetectsHeavyTail) {
  // Samples with variance 4 > sigma^2 T^{2H} = 1 violate the bound at x = -2.
  auto x = standard_normal(20000, 5);
  for (double& v : x) v *= 2.0;
  const std::vector<double> pts{-2.0};
  EXPECT_GT(verify_gaussian_tail(x, ModelParams{}, pts).violations, 0u);
}

TEST(Mgf, BoundHoldsForNarrowLaw) {
  auto x = standard_normal(50000, 6);
  for (double& v : x) v *= 0.5;
  const std::vector<double> lambdas{0.5, 1.0, 2.0};
  const auto r = verify_mgf(x, ModelParams{}, lambdas);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_EQ(r.points_checked, 3u);
}

TEST(Envelopes, RefusesPointMass) {
  const auto d = kde_log_domain(std::vector<double>(10000, 0.0), 0.0);
  XBatch batch;
  EXPECT_THROW(verify_envelopes(d, ModelParams{}, batch), UnsupportedOperation);
}

TEST(Envelopes, GaussianLawPasses) {
  // A centred Gaussian with variance below sigma^2 T^{2H} satisfies both envelope shapes.
  auto x = standard_normal(200000, 7);
  for (double& v : x) v *= 0.55;
  std::vector<double> F(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) F[i] = std::exp(x[i]);
  const auto batch = summarize_x_batch(F, x, CenteringConstant{0.0, 0.0, 1000, 0});
  const auto d = kde_log_domain(x, 0.0, {std::nullopt, 1024, 50, 7, 50});
  const auto e = verify_envelopes(d, ModelParams{}, batch);
  EXPECT_EQ(e.left.violations, 0u);
  EXPECT_EQ(e.right.violations, 0u);
  EXPECT_EQ(e.slope.violations, 0u);
  EXPECT_TRUE(e.left_profile.conclusive);
  EXPECT_TRUE(e.right_profile.conclusive);
}

TEST(Batch, SummaryStatistics) {
  const std::vector<double> F{1.0, 2.0, 3.0, 4.0};
  const std::vector<double> X{-1.0, 0.0, 1.0, 0.0};
  const auto b = summarize_x_batch(F, X, {});
  EXPECT_DOUBLE_EQ(b.mean_F, 2.5);
  EXPECT_DOUBLE_EQ(b.var_F, 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(b.mean_X, 0.0);
  EXPECT_THROW(summarize_x_batch(F, std::vector<double>(3), {}), DimensionMismatch);
}

TEST(WProfile, LinearRelationRecovered) {
  // X / Phi = z / v with constant Phi = v gives w(z) = z / v exactly.
  auto x = standard_normal(50000, 8);
  const std::vector<double> phi(x.size(), 0.5);
  const auto w = estimate_w_X(x, phi, ModelParams{}, 0.2, 50);
  std::size_t resolved = 0;
  for (std::size_t k = 0; k < w.z.size(); ++k) {
    if (!w.resolved[k]) continue;
    ++resolved;
    EXPECT_NEAR(w.w[k], w.z[k] / 0.5, 1e-12);
  }
  EXPECT_GT(resolved, 10u);
  EXPECT_EQ(w.lower.violations, 0u);
  EXPECT_THROW(estimate_w_X(x, std::vector<double>(3), ModelParams{}, 0.2), DimensionMismatch);
}
