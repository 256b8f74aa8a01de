#pragma once

#include "efbm/kernel_table.hpp"
#include "efbm/model.hpp"
#include "efbm/paths.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace efbm {

/// F = int_0^T exp(a s + sigma B^H_s) ds by the trapezoid rule on the path grid.
double functional_F(const FbmPath& path, const ModelParams& params);
double functional_F(std::span<const double> grid, std::span<const double> values, const ModelParams& params);

/// Pathwise bracket T e^{-|a|T + sigma min B^H} <= F <= T e^{|a|T + sigma max B^H}.
struct Bracket {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double f) const { return lower <= f && f <= upper; }
};
Bracket pathwise_bracket(const FbmPath& path, const ModelParams& params);

/// E[F] = int_0^T exp(a s + sigma^2 s^{2H} / 2) ds by adaptive tanh-sinh quadrature.
double analytic_mean_F(const ModelParams& params, double rel_tol = 1e-10);
/// The same integrand summed with trapezoid weights on `grid` (equals M_0).
double analytic_mean_F_on_grid(const ModelParams& params, std::span<const double> grid);
/// E[F^2] = int int exp(a(s+t) + sigma^2 Var(B^H_s + B^H_t) / 2) ds dt.
double analytic_second_moment_F(const ModelParams& params, double rel_tol = 1e-10);

/// Frozen estimate of E[ln F] shared by every X of one experiment.
struct CenteringConstant {
  double mean_lnF = 0.0;
  double standard_error = 0.0;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMinCenteringPaths = 1000;

/// Monte Carlo mean of ln F over paths of stream (seed, centering).
CenteringConstant estimate_mean_lnF(const KernelTable& table, const ModelParams& params, std::size_t n_paths,
                                    std::uint64_t seed);

struct FunctionalSample {
  std::uint64_t path_id = 0;
  double F = 0.0;
  double lnF = 0.0;
  double X = 0.0;
  double min_B = 0.0;
  double max_B = 0.0;
};

/// Samples for paths [first, first + count) of stream (seed, increments), in path order.
std::vector<FunctionalSample> sample_functionals(const KernelTable& table, const ModelParams& params,
                                                 const CenteringConstant& centering, std::uint64_t seed,
                                                 std::uint64_t first, std::size_t count);

nlohmann::json to_json(const CenteringConstant& c);

}  // namespace efbm
