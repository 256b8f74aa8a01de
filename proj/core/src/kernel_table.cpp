#include "efbm/kernel_table.hpp"

#include "efbm/errors.hpp"
#include "efbm/parallel.hpp"
#include "efbm/quadrature.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

namespace efbm {
namespace {

constexpr std::size_t kMaxCells = 16384;
constexpr const char* kFormatName = "efbm.kernel_table";

}  // namespace

KernelTable::KernelTable(double hurst, double horizon, double c_h, std::vector<double> grid,
                         Eigen::MatrixXd values, Eigen::MatrixXd row_weights,
                         std::vector<double> origin_energy, std::vector<double> time_integrals,
                         TableMetadata metadata)
    : hurst_(hurst),
      horizon_(horizon),
      c_h_(c_h),
      grid_(std::move(grid)),
      values_(std::move(values)),
      row_weights_(std::move(row_weights)),
      origin_energy_(std::move(origin_energy)),
      time_integrals_(std::move(time_integrals)),
      metadata_(metadata),
      kernel_(hurst, c_h) {
  HurstParams{hurst, horizon};
  const std::size_t n = cells();
  const auto en = static_cast<Eigen::Index>(n);
  if (grid_.size() < 2 || values_.rows() != en || values_.cols() != en || row_weights_.rows() != en ||
      row_weights_.cols() != en || origin_energy_.size() != n || time_integrals_.size() != n + 1) {
    throw DimensionMismatch("KernelTable: inconsistent array sizes");
  }
  coefficients_ = Eigen::MatrixXd::Zero(en, en);
  discrete_energy_.assign(n, 0.0);
  double max_defect = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const auto r = static_cast<Eigen::Index>(i - 1);
    double energy = 0.0;
    for (std::size_t j = 1; j <= i; ++j) {
      const auto c = static_cast<Eigen::Index>(j - 1);
      const double dt = step(j);
      const double coeff = j == 1 ? std::sqrt(origin_energy_[i - 1] / dt) : row_weights_(r, c) / dt;
      coefficients_(r, c) = coeff;
      energy += coeff * coeff * dt;
    }
    discrete_energy_[i - 1] = energy;
    max_defect = std::max(max_defect, std::abs(energy - std::pow(grid_[i], 2.0 * hurst_)));
  }
  metadata_.max_energy_defect = max_defect;
  const double terminal = std::pow(grid_.back(), 2.0 * hurst_);
  metadata_.terminal_relative_energy_defect = std::abs(discrete_energy_.back() - terminal) / terminal;
}

std::size_t KernelTable::node_index(double t) const {
  const double tol = 1e-12 * horizon_;
  const auto it = std::lower_bound(grid_.begin(), grid_.end(), t - tol);
  if (it == grid_.end() || std::abs(*it - t) > tol) {
    throw DomainError("time " + std::to_string(t) + " is not a grid node");
  }
  return static_cast<std::size_t>(it - grid_.begin());
}

std::vector<double> uniform_grid(double horizon, std::size_t n) {
  std::vector<double> grid(n + 1);
  for (std::size_t i = 0; i <= n; ++i) grid[i] = horizon * static_cast<double>(i) / static_cast<double>(n);
  return grid;
}

std::vector<double> trapezoid_weights(std::span<const double> grid) {
  if (grid.size() < 2) throw DimensionMismatch("trapezoid_weights: grid needs two nodes");
  std::vector<double> q(grid.size(), 0.0);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double h = 0.5 * (grid[i] - grid[i - 1]);
    q[i - 1] += h;
    q[i] += h;
  }
  return q;
}

KernelTable build_kernel_table(double hurst, double horizon, std::size_t n, const TableOptions& options) {
  HurstParams{hurst, horizon};
  if (n < 8) throw DomainError("build_kernel_table: grid size must be >= 8");
  if (n > kMaxCells) {
    throw ResourceError("build_kernel_table: grid size " + std::to_string(n) + " exceeds " +
                        std::to_string(kMaxCells));
  }
  const double c_h = options.c_h > 0.0 ? options.c_h : calibrate_ch(hurst, options.calibration_points);
  const VolterraKernel kernel(hurst, c_h);
  std::vector<double> grid = uniform_grid(horizon, n);
  const auto en = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(en, en);
  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(en, en);
  std::vector<double> origin(n, 0.0);
  const auto gl = quad::gauss_legendre_rule(10);
  const double qtol = options.quadrature_tolerance;

  // Cells away from s = 0 and s = t_i hold a smooth integrand (singular points
  // at least one cell away), so a single Gauss-Legendre panel suffices; the
  // two end cells carry algebraic endpoint singularities and use tanh-sinh.
  parallel_for(n, [&](std::size_t row) {
    const std::size_t i = row + 1;
    const double t = grid[i];
    const auto r = static_cast<Eigen::Index>(row);
    auto k_row = [&](double s) { return kernel(t, s); };
    for (std::size_t j = 1; j <= i; ++j) {
      const auto c = static_cast<Eigen::Index>(j - 1);
      values(r, c) = kernel(t, grid[j]);
      if (j == 1 || j == i) {
        weights(r, c) = quad::tanh_sinh(k_row, grid[j - 1], grid[j], qtol).value;
      } else {
        weights(r, c) = quad::gauss_legendre(gl, k_row, grid[j - 1], grid[j]);
      }
    }
    auto k_sq = [&](double s) {
      const double k = kernel(t, s);
      return k * k;
    };
    origin[row] = quad::tanh_sinh(k_sq, grid[0], grid[1], qtol).value;
  });

  std::vector<double> time_integrals(n + 1);
  parallel_for(n + 1, [&](std::size_t m) { time_integrals[m] = kernel.time_integral(grid[m], horizon); });

  TableMetadata meta;
  meta.energy_tolerance = options.energy_tolerance;
  meta.quadrature_tolerance = qtol;
  meta.cell_gauss_points = 10;
  return KernelTable(hurst, horizon, c_h, std::move(grid), std::move(values), std::move(weights),
                     std::move(origin), std::move(time_integrals), meta);
}

double kernel_time_integral(const KernelTable& table, double theta) {
  return table.time_integral(table.node_index(theta));
}

nlohmann::json to_json(const KernelTable& table) {
  using nlohmann::json;
  const std::size_t n = table.cells();
  json values = json::array();
  json weights = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    json vrow = json::array();
    json wrow = json::array();
    for (std::size_t j = 0; j <= i; ++j) {
      vrow.push_back(table.values()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      wrow.push_back(table.row_weights()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    values.push_back(std::move(vrow));
    weights.push_back(std::move(wrow));
  }
  json time_integrals = json::array();
  for (std::size_t m = 0; m <= n; ++m) {
    const double g = table.time_integral(m);
    time_integrals.push_back(std::isfinite(g) ? json(g) : json(nullptr));
  }
  const auto& meta = table.metadata();
  return json{
      {"format", kFormatName},
      {"version", meta.format_version},
      {"hurst_H", table.hurst()},
      {"horizon_T", table.horizon()},
      {"cells_n", n},
      {"c_h", table.c_h()},
      {"grid", std::vector<double>(table.grid().begin(), table.grid().end())},
      {"values", std::move(values)},
      {"row_weights", std::move(weights)},
      {"origin_energy", std::vector<double>(table.origin_energy().begin(), table.origin_energy().end())},
      {"time_integrals", std::move(time_integrals)},
      {"tolerances",
       {{"energy", meta.energy_tolerance},
        {"quadrature", meta.quadrature_tolerance},
        {"cell_gauss_points", meta.cell_gauss_points}}},
      {"max_energy_defect", meta.max_energy_defect},
      {"terminal_relative_energy_defect", meta.terminal_relative_energy_defect},
  };
}

KernelTable kernel_table_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != kFormatName) throw std::invalid_argument("not a kernel table file");
  if (j.at("version").get<int>() != kKernelTableFormatVersion) {
    throw std::invalid_argument("unsupported kernel table version " + j.at("version").dump());
  }
  const auto n = j.at("cells_n").get<std::size_t>();
  const auto en = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(en, en);
  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(en, en);
  const auto& jv = j.at("values");
  const auto& jw = j.at("row_weights");
  if (jv.size() != n || jw.size() != n) throw DimensionMismatch("kernel table: row count mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (jv[i].size() != i + 1 || jw[i].size() != i + 1) throw DimensionMismatch("kernel table: ragged row");
    for (std::size_t c = 0; c <= i; ++c) {
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = jv[i][c].get<double>();
      weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = jw[i][c].get<double>();
    }
  }
  std::vector<double> time_integrals;
  for (const auto& g : j.at("time_integrals")) {
    time_integrals.push_back(g.is_null() ? std::numeric_limits<double>::infinity() : g.get<double>());
  }
  TableMetadata meta;
  const auto& tol = j.at("tolerances");
  meta.energy_tolerance = tol.at("energy").get<double>();
  meta.quadrature_tolerance = tol.at("quadrature").get<double>();
  meta.cell_gauss_points = tol.at("cell_gauss_points").get<int>();
  return KernelTable(j.at("hurst_H").get<double>(), j.at("horizon_T").get<double>(), j.at("c_h").get<double>(),
                     j.at("grid").get<std::vector<double>>(), std::move(values), std::move(weights),
                     j.at("origin_energy").get<std::vector<double>>(), std::move(time_integrals), meta);
}

void save_kernel_table(const KernelTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(table).dump() << '\n';
}

KernelTable load_kernel_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return kernel_table_from_json(nlohmann::json::parse(in));
}

}  // namespace efbm
