#include "efbm/functional.hpp"

#include "efbm/errors.hpp"
#include "efbm/quadrature.hpp"
#include "efbm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace efbm {

double functional_F(std::span<const double> grid, std::span<const double> values, const ModelParams& params) {
  if (grid.size() != values.size() || grid.size() < 2) throw DimensionMismatch("functional_F: grid/value size");
  double f = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double left = std::exp(params.drift * grid[i - 1] + params.volatility * values[i - 1]);
    const double right = std::exp(params.drift * grid[i] + params.volatility * values[i]);
    f += 0.5 * (grid[i] - grid[i - 1]) * (left + right);
  }
  return f;
}

double functional_F(const FbmPath& path, const ModelParams& params) {
  return functional_F(path.grid, path.values, params);
}

Bracket pathwise_bracket(const FbmPath& path, const ModelParams& params) {
  const auto [lo, hi] = std::minmax_element(path.values.begin(), path.values.end());
  const double T = path.grid.back() - path.grid.front();
  const double at = std::abs(params.drift) * T;
  return {T * std::exp(-at + params.volatility * *lo), T * std::exp(at + params.volatility * *hi)};
}

double analytic_mean_F(const ModelParams& params, double rel_tol) {
  params.validate();
  const double two_h = 2.0 * params.hurst;
  const double half_var = 0.5 * params.volatility * params.volatility;
  auto f = [&](double s) { return std::exp(params.drift * s + half_var * std::pow(s, two_h)); };
  return quad::tanh_sinh(f, 0.0, params.horizon, rel_tol).value;
}

double analytic_mean_F_on_grid(const ModelParams& params, std::span<const double> grid) {
  params.validate();
  const auto q = trapezoid_weights(grid);
  const double half_var = 0.5 * params.volatility * params.volatility;
  double m = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    m += q[i] * std::exp(params.drift * grid[i] + half_var * std::pow(grid[i], 2.0 * params.hurst));
  }
  return m;
}

double analytic_second_moment_F(const ModelParams& params, double rel_tol) {
  params.validate();
  const double H = params.hurst;
  const double a = params.drift;
  const double s2 = params.volatility * params.volatility;
  // The integrand is symmetric; integrate the triangle s <= t, where the
  // |t - s|^{2H} kink sits on the inner endpoint.
  auto inner = [&](double t) {
    auto g = [&](double s) {
      const double var = std::pow(s, 2 * H) + std::pow(t, 2 * H) + 2.0 * covariance(H, t, s);
      return std::exp(a * (s + t) + 0.5 * s2 * var);
    };
    return quad::tanh_sinh(g, 0.0, t, rel_tol).value;
  };
  return 2.0 * quad::tanh_sinh(inner, 0.0, params.horizon, rel_tol).value;
}

CenteringConstant estimate_mean_lnF(const KernelTable& table, const ModelParams& params, std::size_t n_paths,
                                    std::uint64_t seed) {
  params.validate();
  if (n_paths < kMinCenteringPaths) {
    throw DomainError("estimate_mean_lnF: n_paths must be >= " + std::to_string(kMinCenteringPaths));
  }
  std::vector<double> lnF(n_paths);
  const auto grid = table.grid();
  const auto q = trapezoid_weights(grid);
  for_each_path_block(table, seed, StreamPurpose::centering, 0, n_paths, [&](const PathBlock& block) {
    for (Eigen::Index k = 0; k < block.values.cols(); ++k) {
      double f = q[0];
      for (Eigen::Index i = 0; i < block.values.rows(); ++i) {
        const auto node = static_cast<std::size_t>(i) + 1;
        f += q[node] * std::exp(params.drift * grid[node] + params.volatility * block.values(i, k));
      }
      lnF[block.first + static_cast<std::size_t>(k)] = std::log(f);
    }
  });
  const auto est = stats::mean_estimate(lnF);
  return {est.mean, est.standard_error, n_paths, seed};
}

std::vector<FunctionalSample> sample_functionals(const KernelTable& table, const ModelParams& params,
                                                 const CenteringConstant& centering, std::uint64_t seed,
                                                 std::uint64_t first, std::size_t count) {
  params.validate();
  std::vector<FunctionalSample> out(count);
  const auto grid = table.grid();
  const auto q = trapezoid_weights(grid);
  for_each_path_block(table, seed, StreamPurpose::increments, first, count, [&](const PathBlock& block) {
    for (Eigen::Index k = 0; k < block.values.cols(); ++k) {
      double f = q[0];
      double lo = 0.0;
      double hi = 0.0;
      for (Eigen::Index i = 0; i < block.values.rows(); ++i) {
        const auto node = static_cast<std::size_t>(i) + 1;
        const double b = block.values(i, k);
        f += q[node] * std::exp(params.drift * grid[node] + params.volatility * b);
        lo = std::min(lo, b);
        hi = std::max(hi, b);
      }
      auto& s = out[block.first - first + static_cast<std::size_t>(k)];
      s.path_id = block.first + static_cast<std::uint64_t>(k);
      s.F = f;
      s.lnF = std::log(f);
      s.X = s.lnF - centering.mean_lnF;
      s.min_B = lo;
      s.max_B = hi;
    }
  });
  return out;
}

nlohmann::json to_json(const CenteringConstant& c) {
  return {{"mean_lnF", c.mean_lnF}, {"standard_error", c.standard_error}, {"n_paths", c.n_paths}, {"seed", c.seed}};
}

}  // namespace efbm
