#pragma once

#include "efbm/bound_report.hpp"
#include "efbm/kernel_table.hpp"
#include "efbm/model.hpp"
#include "efbm/paths.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace efbm {

// Grid convention: theta-node t_m (m = 0..n) stands for the driving increment
// of cell m+1, and conditioning on F_theta means conditioning on dB_1..dB_m.
// Derivatives at theta = T vanish. With e_i = exp(a t_i + sigma B_i), F the
// trapezoid sum and q its weights,
//   D_theta X = sigma sum_i q_i c_{i,m+1} e_i / F,
//   D_r D_theta X = sigma^2 sum_i q_i c_{i,r+1} c_{i,m+1} e_i / F - D_r X D_theta X,
// which are the exact derivatives of the discrete X in the increments.

/// D_theta X at nodes 0..n.
std::vector<double> dX(const FbmPath& path, const KernelTable& table, const ModelParams& params);

/// D_r D_theta X as an (n+1) x (n+1) symmetric matrix; the last row and column are 0.
Eigen::MatrixXd d2X(const FbmPath& path, const KernelTable& table, const ModelParams& params);

/// sigma K(T, t_m) at nodes 0..n (+inf at m = 0, 0 at m = n).
std::vector<double> dX_upper_bound(const KernelTable& table, double volatility);

struct NestedOptions {
  std::size_t inner_paths = 200;  // even; drawn as antithetic pairs
  std::size_t stride = 4;         // theta-subgrid spacing for phi_X
  std::uint64_t seed = 0;         // inner stream seed
};

struct ConditionalEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  std::size_t inner_paths = 0;
};

/// E[D_theta X | F_theta] by nested Monte Carlo: the first m increments are
/// kept, the remaining ones are redrawn from
/// RandomStream(options.seed, inner, path.seed.index, m).
ConditionalEstimate conditional_dX(const FbmPath& path, const KernelTable& table, const ModelParams& params,
                                   double theta, const NestedOptions& options = {});

/// Per-path Malliavin quantities.
struct MalliavinProfile {
  std::vector<double> dX;             // nodes 0..n
  std::optional<Eigen::MatrixXd> d2X;  // when requested
  std::vector<std::size_t> subgrid;   // nodes where cond_dX was simulated
  std::vector<double> cond_dX;        // nodes 0..n, interpolated off the subgrid
  std::vector<double> cond_se;        // nodes 0..n, 0 off the subgrid
  double phi_X = 0.0;
  double phi_se = 0.0;
  /// Pathwise lower bound for phi_X built from min/max of B^H, min of N and max of M.
  double phi_lower_bound = 0.0;
  double min_B = 0.0;
  double max_B = 0.0;
  double min_N = 0.0;
  double max_M = 0.0;
};

/// Theta-subgrid used by phi_X: every `stride`-th node plus node n-1.
std::vector<std::size_t> theta_subgrid(std::size_t cells, std::size_t stride);

/// Phi_X = sum_m dt dX_m E[dX_m | F_m]. The conditional term is simulated on the
/// subgrid and interpolated linearly in its ratio to sigma c_{n,m+1}.
MalliavinProfile malliavin_profile(const FbmPath& path, const KernelTable& table, const ModelParams& params,
                                   const NestedOptions& options = {}, bool with_d2 = false);

struct PhiEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;  // sigma^2 T^{2H}
};
PhiEstimate phi_X(const FbmPath& path, const KernelTable& table, const ModelParams& params,
                  const NestedOptions& options = {});

/// sum_m dt (sum_i q_i c_{i,m+1})^2, the grid version of
/// int_0^T (int_theta^T K(s, theta) ds)^2 dtheta that enters the lower bound.
double discrete_aggregate_integral(const KernelTable& table);

/// Clark-Ocone residual F - E[F] - sum_m E[D_m F | F_m] dB_{m+1} with the
/// conditional expectations in closed form (lognormal conditional means).
double clark_ocone_residual(const FbmPath& path, const KernelTable& table, const ModelParams& params);

struct ResidualStatistics {
  std::size_t paths = 0;
  double mean = 0.0;
  double standard_error = 0.0;
  double variance = 0.0;
  double variance_se = 0.0;
};
ResidualStatistics clark_ocone_residual(const KernelTable& table, const ModelParams& params, std::uint64_t seed,
                                        std::uint64_t first, std::size_t count);

/// Outcome of the D_s Phi_X check on one path.
struct DphiResult {
  std::vector<double> dphi;     // nodes 0..n
  std::vector<double> dphi_se;
  double integral = 0.0;        // sum_s dt D_s Phi_X E[D_s X | F_s]
  double integral_se = 0.0;
  double phi_full = 0.0;        // Phi_X from the full-grid conditional estimates
};

/// D_s Phi_X = sum_m dt D_s D_m X E[D_m X|F_m] + sum_{m>s} dt D_m X E[D_s D_m X|F_m]
/// on the full theta grid (doubly nested).
DphiResult dphi(const FbmPath& path, const KernelTable& table, const ModelParams& params,
                const NestedOptions& options = {});

struct DphiCheck {
  BoundReport pointwise;  // 0 <= D_s Phi_X <= 4 sigma^3 K(T,s) T^{2H}
  BoundReport integral;   // 0 <= int D_s Phi_X E[D_s X|F_s] ds <= 4 sigma^4 T^{4H}
  std::size_t paths_requested = 0;
  std::size_t paths_done = 0;
  /// Per completed path: ln F, full-grid Phi_X and the integral above.
  std::vector<double> lnF;
  std::vector<double> phi;
  std::vector<double> dphi_integral;
};

/// Runs dphi on paths [first, first + count) of stream (seed, increments).
/// `budget` caps the number of inner path evaluations; when it would be
/// exceeded the remaining paths are skipped and coverage < 1 is reported.
DphiCheck dphi_bound_check(const KernelTable& table, const ModelParams& params, std::uint64_t seed,
                           std::uint64_t first, std::size_t count, const NestedOptions& options = {},
                           std::optional<std::size_t> budget = std::nullopt);
DphiCheck dphi_bound_check(const FbmPath& path, const KernelTable& table, const ModelParams& params,
                           const NestedOptions& options = {});

/// Batch of nested-MC profiles for the derivative and variance-identity suites.
struct NestedBatch {
  std::vector<double> X;
  std::vector<double> phi;
  std::vector<double> phi_se;
  std::vector<double> mean_dX;       // nodes 0..n, averaged over paths
  std::vector<double> mean_cond_dX;  // nodes 0..n
  BoundReport kld2;      // 0 <= D_theta X <= sigma K(T,theta), pathwise and conditional
  BoundReport kld3;      // 0 <= D_r D_theta X <= 2 sigma^2 K(T,theta) K(T,r)
  BoundReport phi_upper; // 0 <= Phi_X <= sigma^2 T^{2H}
  BoundReport ol0;       // Phi_X >= pathwise lower bound
};

/// Runs malliavin_profile (with d2X) on paths [first, first + count) and
/// checks the derivative bounds. X uses the supplied centering constant.
NestedBatch nested_batch(const KernelTable& table, const ModelParams& params, double mean_lnF,
                         std::uint64_t seed, std::uint64_t first, std::size_t count,
                         const NestedOptions& options = {});

}  // namespace efbm
