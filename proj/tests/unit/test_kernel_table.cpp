#include "efbm/errors.hpp"
#include "efbm/kernel_table.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace efbm;


namespace {
const KernelTable& table256() {
  static const KernelTable t = build_kernel_table(0.7, 1.0, 256);
  return t;
}
}  // namespace

TEST(KernelTable, RejectsSmallGrid) { EXPECT_THROW(build_kernel_table(0.7, 1.0, 4), DomainError); }

TEST(KernelTable, RejectsHugeGrid) { EXPECT_THROW(build_kernel_table(0.7, 1.0, 1u << 20), ResourceError); }

TEST(KernelTable, DiagonalZeroAndNonNegative) {
  const auto& t = table256();
  const auto& v = t.values();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    EXPECT_EQ(v(i, i), 0.0);
    for (Eigen::Index j = 0; j < i; ++j) {
      ASSERT_GE(v(i, j), 0.0);
      if (i > 0 && j < i) ASSERT_GE(v(i, j), v(i - 1, j) - 1e-12);
    }
  }
  const auto& w = t.row_weights();
  EXPECT_GE(w.minCoeff(), 0.0);
}

TEST(KernelTable, DiscreteEnergy) {
  for (double H : {0.55, 0.7, 0.9}) {
    const auto t = build_kernel_table(H, 1.0, 256);
    double worst = 0.0;
    for (std::size_t i = 1; i <= t.cells(); ++i) {
      worst = std::max(worst, std::abs(t.discrete_energy(i) - std::pow(t.grid()[i], 2 * H)));
    }
    EXPECT_LT(worst, 5e-3) << "H=" << H;
    EXPECT_NEAR(t.metadata().max_energy_defect, worst, 1e-12);
  }
}

TEST(KernelTable, CovarianceReproduction) {
  const auto& t = table256();
  const std::size_t n = t.cells();
  double s = 0.0;
  for (std::size_t j = 1; j <= n / 2; ++j) s += t.coefficient(n, j) * t.coefficient(n / 2, j) * t.step(j);
  EXPECT_NEAR(s, covariance(0.7, 1.0, 0.5), 5e-3);
}

TEST(KernelTable, TimeIntegralAtGridNodes) {
  const auto& t = table256();
  EXPECT_EQ(kernel_time_integral(t, 1.0), 0.0);
  const VolterraKernel k(0.7, t.c_h());
  EXPECT_NEAR(kernel_time_integral(t, 0.5), k.time_integral(0.5, 1.0), 1e-10);
  EXPECT_THROW(kernel_time_integral(t, 0.5 + 1e-4), DomainError);
}

TEST(KernelTable, JsonRoundTrip) {
  const auto t = build_kernel_table(0.65, 2.0, 16);
  const auto path = std::filesystem::temp_directory_path() / "efbm_table_roundtrip.json";
  save_kernel_table(t, path);
  const auto u = load_kernel_table(path);
  std::filesystem::remove(path);
  EXPECT_EQ(u.cells(), t.cells());
  EXPECT_EQ(u.c_h(), t.c_h());
  EXPECT_EQ((u.coefficients() - t.coefficients()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((u.row_weights() - t.row_weights()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(u.time_integral(3), t.time_integral(3));
}

TEST(KernelTable, RejectsWrongFormat) {
  auto j = to_json(build_kernel_table(0.7, 1.0, 8));
  j["format"] = "other";
  EXPECT_ANY_THROW(kernel_table_from_json(j));
}

TEST(KernelTable, Deterministic) {
  const auto a = build_kernel_table(0.7, 1.0, 64);
  const auto b = build_kernel_table(0.7, 1.0, 64);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}
