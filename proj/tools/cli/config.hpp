#pragma once

#include "efbm/model.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace efbm::cli {

/// Invalid configuration or missing dependency; exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every knob of a run. Serialized as flat JSON with units in the key names;
/// the effective config (defaults resolved) is echoed into every output.
struct ExperimentConfig {
  // model
  double drift_a_per_time = 0.0;
  double volatility_sigma = 1.0;
  double hurst_H = 0.7;
  double horizon_T = 1.0;
  // grids
  std::size_t grid_n = 256;
  std::size_t nested_grid_n = 64;
  // Monte Carlo sizes
  std::size_t paths = 1000000;           // samples for simulate / density / tail suites
  std::size_t centering_paths = 100000;  // frozen E[ln F]
  std::size_t nested_paths = 10000;      // outer paths of the nested suites
  std::size_t inner_paths = 200;
  std::size_t theta_stride = 4;
  std::size_t dphi_paths = 2000;
  std::size_t dphi_budget_inner_evals = 0;  // 0 = unlimited
  std::size_t clark_ocone_paths = 10000;
  std::size_t bootstrap_resamples = 100;
  std::size_t kde_grid_points = 1024;
  double kde_bandwidth_X = 0.0;  // 0 = Silverman
  std::size_t min_tail_samples = 50;
  double w_bin_width_X = 0.1;
  std::size_t dump_paths = 0;  // path CSV rows written by simulate
  // seeds
  std::uint64_t seed = 20240601;
  // tolerances
  double relative_tolerance = 1e-9;
  double se_multiplier = 3.0;
  double table_energy_tolerance = 5e-3;
  double quadrature_tolerance = 1e-12;
  double continuous_energy_tolerance = 1e-6;
  double aggregate_tolerance = 1e-4;
  int calibration_points = 257;
  std::vector<double> tail_points_X = {-0.5, -1.0, -1.5, -2.0};
  std::vector<double> mgf_lambdas = {0.5, 1.0, 2.0};
  // fault injection: multiplies the calibrated c_H (kernel-verify only)
  double fault_ch_scale = 1.0;
  // not part of the hash
  std::filesystem::path out_dir = "efbm_out";

  ModelParams model() const { return {drift_a_per_time, volatility_sigma, hurst_H, horizon_T}; }
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Unknown keys and ill-typed values raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);
std::string config_hash(const ExperimentConfig& c);
/// Hash of the fields that determine the cached sample batch.
std::string sample_hash(const ExperimentConfig& c);

}  // namespace efbm::cli
