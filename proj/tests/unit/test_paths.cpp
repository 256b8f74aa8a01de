#include "efbm/errors.hpp"
#include "efbm/functional.hpp"
#include "efbm/kernel_table.hpp"
#include "efbm/paths.hpp"
#include "efbm/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace efbm;
using namespace efbm::stats;

namespace {
const KernelTable& table64() {
  static const KernelTable t = build_kernel_table(0.7, 1.0, 64);
  return t;
}
}  // namespace

TEST(Increments, DeterministicAndScaled) {
  const auto grid = uniform_grid(1.0, 4);
  const auto a = sample_bm_increments(grid, {9, StreamPurpose::increments, 3, 0});
  const auto b = sample_bm_increments(grid, {9, StreamPurpose::increments, 3, 0});
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, sample_bm_increments(grid, {9, StreamPurpose::increments, 4, 0}));
  // Variance dt per increment.
  const auto fine = uniform_grid(2.0, 8);
  Accumulator acc;
  for (std::uint64_t p = 0; p < 20000; ++p) {
    for (double d : sample_bm_increments(fine, {1, StreamPurpose::increments, p, 0})) acc.add(d * d);
  }
  EXPECT_NEAR(acc.mean(), 0.25, 4 * acc.standard_error());
}

TEST(FbmFromBm, ZeroIncrementsGiveZeroPath) {
  const auto& t = table64();
  const auto path = fbm_from_bm(t, std::vector<double>(64, 0.0));
  ASSERT_EQ(path.values.size(), 65u);
  for (double v : path.values) EXPECT_EQ(v, 0.0);
}

TEST(FbmFromBm, LinearInIncrements) {
  const auto& t = table64();
  auto inc = sample_bm_increments(t.grid(), {2, StreamPurpose::increments, 0, 0});
  const auto p1 = fbm_from_bm(t, inc);
  for (double& d : inc) d *= -2.5;
  const auto p2 = fbm_from_bm(t, inc);
  for (std::size_t i = 0; i <= 64; ++i) EXPECT_NEAR(p2.values[i], -2.5 * p1.values[i], 1e-13);
}

TEST(FbmFromBm, DimensionMismatch) {
  EXPECT_THROW(fbm_from_bm(table64(), std::vector<double>(63, 0.0)), DimensionMismatch);
}

TEST(PathBlock, MatchesSinglePathSampler) {
  const auto& t = table64();
  bool seen = false;
  for_each_path_block(t, 17, StreamPurpose::increments, 250, 10, [&](const PathBlock& b) {
    for (Eigen::Index c = 0; c < b.values.cols(); ++c) {
      const auto p = sample_fbm_volterra(t, {17, StreamPurpose::increments, b.first + c, 0});
      for (std::size_t i = 1; i <= 64; ++i) ASSERT_NEAR(b.values(i - 1, c), p.values[i], 1e-13);
    }
    seen = true;
  });
  EXPECT_TRUE(seen);
}

TEST(Cholesky, DiagonalReproducesVariance) {
  const auto grid = uniform_grid(1.0, 64);
  const CholeskySampler s(0.7, grid);
  const auto& L = s.factor();
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    const double t = grid[static_cast<std::size_t>(i) + 1];
    EXPECT_NEAR(L.row(i).squaredNorm(), std::pow(t, 1.4) + s.jitter(), 1e-12);
  }
}

TEST(Cholesky, DeterministicAndWithoutIncrements) {
  const auto grid = uniform_grid(1.0, 32);
  const auto a = sample_fbm_cholesky(0.7, grid, {5, StreamPurpose::cholesky, 1, 0});
  const auto b = sample_fbm_cholesky(0.7, grid, {5, StreamPurpose::cholesky, 1, 0});
  EXPECT_EQ(a.values, b.values);
  EXPECT_FALSE(a.increments.has_value());
  EXPECT_EQ(a.values[0], 0.0);
}

TEST(Cholesky, MarginalAgreesWithVolterra) {
  // KS between the two samplers at T (10^4 each, n=256).
  const auto t = build_kernel_table(0.7, 1.0, 256);
  const CholeskySampler chol(0.7, t.grid());
  std::vector<double> a;
  std::vector<double> b;
  for (std::uint64_t p = 0; p < 10000; ++p) {
    a.push_back(chol.sample({21, StreamPurpose::cholesky, p, 0}).values.back());
  }
  for_each_path_block(t, 21, StreamPurpose::increments, 0, 10000, [&](const PathBlock& blk) {
    for (Eigen::Index c = 0; c < blk.values.cols(); ++c) b.push_back(blk.values(255, c));
  });
  EXPECT_LT(ks_two_sample(a, b), ks_critical_value(a.size(), b.size(), 0.01));
}

TEST(ConditionalLaw, NoInformationAndFullInformation) {
  const auto& t = table64();
  const auto path = sample_fbm_volterra(t, {3, StreamPurpose::increments, 0, 0});
  const auto none = conditional_law(path, t, 0.0);
  for (std::size_t i = 0; i <= 64; ++i) {
    EXPECT_EQ(none.means[i], 0.0);
    EXPECT_NEAR(none.variances[i], std::pow(t.grid()[i], 1.4), 1e-14);
  }
  const auto full = conditional_law(path, t, 1.0);
  for (std::size_t i = 0; i <= 64; ++i) {
    EXPECT_NEAR(full.means[i], path.values[i], 1e-13);
    EXPECT_EQ(full.variances[i], 0.0);
  }
  const auto mid = conditional_law(path, t, 0.5);
  for (std::size_t i = 0; i <= 64; ++i) EXPECT_GE(mid.variances[i], 0.0);
  EXPECT_THROW(conditional_law(path, t, 0.5001), DomainError);
}

TEST(ConditionalLaw, RequiresIncrements) {
  const auto& t = table64();
  const auto path = sample_fbm_cholesky(0.7, t.grid(), {1, StreamPurpose::cholesky, 0, 0});
  EXPECT_THROW(conditional_law(path, t, 0.5), UnsupportedOperation);
}

TEST(Martingale, Endpoints) {
  const auto& t = table64();
  const ModelParams params{0.3, 0.8, 0.7, 1.0};
  const auto path = sample_fbm_volterra(t, {8, StreamPurpose::increments, 2, 0});
  EXPECT_NEAR(martingale_M(path, t, params, 1.0), functional_F(path, params), 1e-14);
  EXPECT_NEAR(martingale_M(path, t, params, 0.0), analytic_mean_F_on_grid(params, t.grid()), 1e-12);
  EXPECT_NEAR(analytic_mean_F_on_grid(params, t.grid()), analytic_mean_F(params), 1e-4);
  const auto profile = martingale_profile(path, t, params);
  for (std::size_t r : {0u, 10u, 33u, 64u}) {
    EXPECT_NEAR(profile.values[r], martingale_M(path, t, params, t.grid()[r]), 1e-12);
  }
}

TEST(Martingale, MeanIsPreserved) {
  const auto& t = table64();
  const ModelParams params;
  Accumulator acc;
  for (std::uint64_t p = 0; p < 4000; ++p) {
    acc.add(martingale_M(sample_fbm_volterra(t, {4, StreamPurpose::increments, p, 0}), t, params, 0.5));
  }
  EXPECT_NEAR(acc.mean(), analytic_mean_F_on_grid(params, t.grid()), 3 * acc.standard_error());
}

TEST(PathLaw, SampleCovarianceMatches) {
  const auto t = build_kernel_table(0.7, 1.0, 128);
  std::vector<std::vector<double>> cols(3);
  const std::size_t nodes[3] = {32, 64, 128};
  for_each_path_block(t, 33, StreamPurpose::increments, 0, 20000, [&](const PathBlock& b) {
    for (Eigen::Index c = 0; c < b.values.cols(); ++c) {
      for (int k = 0; k < 3; ++k) cols[k].push_back(b.values(static_cast<Eigen::Index>(nodes[k]) - 1, c));
    }
  });
  for (int a = 0; a < 3; ++a) {
    for (int b = a; b < 3; ++b) {
      const auto est = covariance_estimate(cols[a], cols[b]);
      const double ref = covariance(0.7, t.grid()[nodes[a]], t.grid()[nodes[b]]);
      EXPECT_NEAR(est.covariance, ref, 3 * est.standard_error + 5e-3) << nodes[a] << "," << nodes[b];
    }
  }
}
