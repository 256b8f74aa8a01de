#include "config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace efbm::cli {

#define EFBM_CONFIG_FIELDS(X)                                                                             \
  X(drift_a_per_time) X(volatility_sigma) X(hurst_H) X(horizon_T) X(grid_n) X(nested_grid_n) X(paths)     \
  X(centering_paths) X(nested_paths) X(inner_paths) X(theta_stride) X(dphi_paths)                        \
  X(dphi_budget_inner_evals) X(clark_ocone_paths) X(bootstrap_resamples) X(kde_grid_points)              \
  X(kde_bandwidth_X) X(min_tail_samples) X(w_bin_width_X) X(dump_paths) X(seed) X(relative_tolerance)    \
  X(se_multiplier) X(table_energy_tolerance) X(quadrature_tolerance) X(continuous_energy_tolerance)      \
  X(aggregate_tolerance) X(calibration_points) X(tail_points_X) X(mgf_lambdas) X(fault_ch_scale)

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
#define EFBM_WRITE(name) j[#name] = c.name;
  EFBM_CONFIG_FIELDS(EFBM_WRITE)
#undef EFBM_WRITE
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::set<std::string> known;
#define EFBM_KNOWN(name) known.insert(#name);
  EFBM_CONFIG_FIELDS(EFBM_KNOWN)
#undef EFBM_KNOWN
  for (const auto& [key, value] : j.items()) {
    if (key == "out_dir") continue;
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  try {
#define EFBM_READ(name) \
  if (j.contains(#name)) j.at(#name).get_to(base.name);
    EFBM_CONFIG_FIELDS(EFBM_READ)
#undef EFBM_READ
    if (j.contains("out_dir")) base.out_dir = j.at("out_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  base.validate();
  return base;
}

void ExperimentConfig::validate() const {
  try {
    model().validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (grid_n < 8 || nested_grid_n < 8) throw ConfigError("grid sizes must be >= 8");
  if (centering_paths < 1000) throw ConfigError("centering_paths must be >= 1000");
  if (inner_paths < 50 || inner_paths % 2 != 0) throw ConfigError("inner_paths must be even and >= 50");
  if (theta_stride == 0) throw ConfigError("theta_stride must be >= 1");
  if (kde_grid_points < 16) throw ConfigError("kde_grid_points must be >= 16");
  if (!(w_bin_width_X > 0.0)) throw ConfigError("w_bin_width_X must be positive");
  if (kde_bandwidth_X < 0.0) throw ConfigError("kde_bandwidth_X must be >= 0");
  if (!(fault_ch_scale > 0.0)) throw ConfigError("fault_ch_scale must be positive");
  if (calibration_points < 64) throw ConfigError("calibration_points must be >= 64");
  for (double x : tail_points_X) {
    if (x > 0.0) throw ConfigError("tail_points_X must be <= 0");
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const ExperimentConfig& c) { return fnv1a_hex(to_json(c).dump()); }

std::string sample_hash(const ExperimentConfig& c) {
  const nlohmann::json j{{"drift_a_per_time", c.drift_a_per_time}, {"volatility_sigma", c.volatility_sigma},
                         {"hurst_H", c.hurst_H},                   {"horizon_T", c.horizon_T},
                         {"grid_n", c.grid_n},                     {"paths", c.paths},
                         {"centering_paths", c.centering_paths},   {"seed", c.seed},
                         {"table_energy_tolerance", c.table_energy_tolerance},
                         {"quadrature_tolerance", c.quadrature_tolerance}};
  return fnv1a_hex(j.dump());
}

}  // namespace efbm::cli
