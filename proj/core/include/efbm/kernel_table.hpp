#pragma once

#include "efbm/kernel.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace efbm {

inline constexpr int kKernelTableFormatVersion = 1;

struct TableOptions {
  /// 0 selects the calibrated constant; any other value is used verbatim
  /// (the CLI uses this for fault injection).
  double c_h = 0.0;
  /// Accepted max_i |sum_j c_ij^2 dt_j - t_i^{2H}| for the discrete map.
  double energy_tolerance = 5e-3;
  /// Relative tolerance of the singular per-cell quadratures.
  double quadrature_tolerance = 1e-12;
  int calibration_points = 257;
};

struct TableMetadata {
  int format_version = kKernelTableFormatVersion;
  double energy_tolerance = 5e-3;
  double quadrature_tolerance = 1e-12;
  int cell_gauss_points = 10;
  /// max over rows of |discrete energy - t_i^{2H}|, filled at construction.
  double max_energy_defect = 0.0;
  /// |discrete energy - T^{2H}| / T^{2H} at the last row.
  double terminal_relative_energy_defect = 0.0;
};

/// Discretized Volterra kernel on a grid 0 = t_0 < ... < t_n = T.
///
/// Rows are indexed by node i = 1..n, cells by j = 1..n (cell j is
/// [t_{j-1}, t_j]); storage is 0-based, entry (i-1, j-1), zero above the
/// diagonal. The discrete Volterra map is B^H_{t_i} = sum_j c_ij dB_j with
///   c_ij = w_ij / dt_j                      for j >= 2,
///   c_i1 = sqrt(int_0^{t_1} K(t_i,s)^2 ds / dt_1)   (origin cell),
/// where w_ij = int_{cell j} K(t_i, r) dr are the stored row weights. The
/// origin cell carries the s^{1/2-H} singularity; matching its energy instead
/// of its mean keeps Var(B^H_{t_i}) within the table tolerance for H near 1.
/// Immutable after construction.
class KernelTable {
 public:
  KernelTable(double hurst, double horizon, double c_h, std::vector<double> grid,
              Eigen::MatrixXd values, Eigen::MatrixXd row_weights, std::vector<double> origin_energy,
              std::vector<double> time_integrals, TableMetadata metadata);

  double hurst() const { return hurst_; }
  double horizon() const { return horizon_; }
  double c_h() const { return c_h_; }
  std::size_t cells() const { return grid_.size() - 1; }
  std::span<const double> grid() const { return grid_; }
  double step(std::size_t cell) const { return grid_[cell] - grid_[cell - 1]; }

  /// K(t_i, t_j), j <= i (0-based storage as documented above).
  const Eigen::MatrixXd& values() const { return values_; }
  const Eigen::MatrixXd& row_weights() const { return row_weights_; }
  const Eigen::MatrixXd& coefficients() const { return coefficients_; }
  std::span<const double> origin_energy() const { return origin_energy_; }

  /// c_ij for node i in 1..n and cell j in 1..n (0 when j > i).
  double coefficient(std::size_t node, std::size_t cell) const {
    return coefficients_(static_cast<Eigen::Index>(node - 1), static_cast<Eigen::Index>(cell - 1));
  }
  /// sum_j c_ij^2 dt_j; 0 at node 0.
  double discrete_energy(std::size_t node) const { return node == 0 ? 0.0 : discrete_energy_[node - 1]; }
  /// int_{t_m}^T K(s, t_m) ds at node m (+inf at m = 0).
  double time_integral(std::size_t node) const { return time_integrals_.at(node); }

  /// Index of the grid node equal to t (relative tolerance 1e-12 of T);
  /// DomainError otherwise.
  std::size_t node_index(double t) const;

  const TableMetadata& metadata() const { return metadata_; }
  const VolterraKernel& kernel() const { return kernel_; }

 private:
  double hurst_;
  double horizon_;
  double c_h_;
  std::vector<double> grid_;
  Eigen::MatrixXd values_;
  Eigen::MatrixXd row_weights_;
  std::vector<double> origin_energy_;
  std::vector<double> time_integrals_;
  Eigen::MatrixXd coefficients_;
  std::vector<double> discrete_energy_;
  TableMetadata metadata_;
  VolterraKernel kernel_;
};

/// Uniform grid t_i = i T / n.
std::vector<double> uniform_grid(double horizon, std::size_t n);

/// Trapezoid weights on `grid`; they sum to T.
std::vector<double> trapezoid_weights(std::span<const double> grid);

/// Builds the table on the uniform n-cell grid; n >= 8.
KernelTable build_kernel_table(double hurst, double horizon, std::size_t n, const TableOptions& options = {});

/// int_theta^T K(s, theta) ds for a grid node theta.
double kernel_time_integral(const KernelTable& table, double theta);

nlohmann::json to_json(const KernelTable& table);
KernelTable kernel_table_from_json(const nlohmann::json& j);
void save_kernel_table(const KernelTable& table, const std::filesystem::path& path);
KernelTable load_kernel_table(const std::filesystem::path& path);

}  // namespace efbm
