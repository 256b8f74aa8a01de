#include "commands.hpp"

#include "efbm/bound_report.hpp"
#include "efbm/density.hpp"
#include "efbm/errors.hpp"
#include "efbm/functional.hpp"
#include "efbm/kernel.hpp"
#include "efbm/kernel_table.hpp"
#include "efbm/malliavin.hpp"
#include "efbm/parallel.hpp"
#include "efbm/paths.hpp"
#include "efbm/stats.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

namespace efbm::cli {
namespace fs = std::filesystem;

namespace {

constexpr const char* kSamplesFile = "samples.csv";

class Timer {
 public:
  explicit Timer(std::ostream* err, std::string label) : err_(err), label_(std::move(label)) {}
  ~Timer() {
    if (!err_) return;
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    *err_ << "[efbm] " << label_ << ": " << std::fixed << std::setprecision(2) << s << " s\n";
  }

 private:
  std::ostream* err_;
  std::string label_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

nlohmann::json provenance(const ExperimentConfig& c) {
  return {{"config_hash", config_hash(c)},
          {"sample_hash", sample_hash(c)},
          {"seed", c.seed},
          {"grid", {{"horizon_T", c.horizon_T}, {"grid_n", c.grid_n}, {"nested_grid_n", c.nested_grid_n},
                    {"kind", "uniform"}}},
          {"code_version", EFBM_VERSION},
          {"tolerances",
           {{"relative", c.relative_tolerance},
            {"se_multiplier", c.se_multiplier},
            {"table_energy", c.table_energy_tolerance},
            {"quadrature", c.quadrature_tolerance}}},
          {"partition", {{"path_block", kPathBlock}, {"nested_chunk", 16}}},
          {"effective_config", to_json(c)}};
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ResourceError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_dir(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ResourceError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

BoundReport configured(BoundReport r, const ExperimentConfig& c) {
  r.relative_tolerance = c.relative_tolerance;
  r.se_multiplier = c.se_multiplier;
  return r;
}

int exit_code(const std::vector<BoundReport>& reports) {
  bool partial = false;
  for (const auto& r : reports) {
    if (r.status() == BoundStatus::fail) return kViolation;
    if (r.status() == BoundStatus::partial) partial = true;
  }
  return partial ? kResourceExceeded : kPass;
}

nlohmann::json reports_json(const std::vector<BoundReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  return arr;
}

void print_table(std::ostream& out, const std::string& title, const nlohmann::json& reports) {
  out << title << "\n";
  out << std::left << std::setw(26) << "bound_id" << std::setw(14) << "status" << std::setw(12) << "checked"
      << std::setw(12) << "violations" << "max_excess\n";
  for (const auto& r : reports) {
    out << std::left << std::setw(26) << r.at("bound_id").get<std::string>() << std::setw(14)
        << r.at("status").get<std::string>() << std::setw(12) << r.at("points_checked").get<std::size_t>()
        << std::setw(12) << r.at("violations").get<std::size_t>();
    if (r.at("max_excess").is_null()) {
      out << "-";
    } else {
      out << std::scientific << std::setprecision(3) << r.at("max_excess").get<double>() << std::defaultfloat;
    }
    out << "\n";
  }
}

int emit(const RunContext& ctx, const std::string& title, const nlohmann::json& doc,
         const std::vector<BoundReport>& reports) {
  if (ctx.json) {
    *ctx.out << doc.dump(2) << "\n";
  } else {
    print_table(*ctx.out, title, doc.at("reports"));
  }
  return exit_code(reports);
}

KernelTable cached_table(const RunContext& ctx, std::size_t n, double c_h = 0.0) {
  const auto& c = ctx.config;
  TableOptions opt;
  opt.c_h = c_h;
  opt.energy_tolerance = c.table_energy_tolerance;
  opt.quadrature_tolerance = c.quadrature_tolerance;
  opt.calibration_points = c.calibration_points;
  const nlohmann::json key{{"H", c.hurst_H}, {"T", c.horizon_T}, {"n", n}, {"c_h", c_h},
                           {"tol", c.table_energy_tolerance}, {"qtol", c.quadrature_tolerance},
                           {"cal", c.calibration_points}, {"v", kKernelTableFormatVersion}};
  const fs::path file = c.out_dir / "cache" / ("kernel_table_" + fnv1a_hex(key.dump()) + ".json");
  if (fs::exists(file)) {
    try {
      return load_kernel_table(file);
    } catch (const std::exception& e) {
      *ctx.err << "[efbm] ignoring unreadable table cache " << file << ": " << e.what() << "\n";
    }
  }
  Timer t(ctx.err, "kernel table n=" + std::to_string(n));
  auto table = build_kernel_table(c.hurst_H, c.horizon_T, n, opt);
  ensure_dir(file.parent_path());
  save_kernel_table(table, file);
  return table;
}

// ---------------------------------------------------------------- samples

std::string samples_header(const ExperimentConfig& c, const CenteringConstant& centering) {
  std::ostringstream h;
  h << "# efbm samples\n";
  h << "# code_version: " << EFBM_VERSION << "\n";
  h << "# config_hash: " << config_hash(c) << "\n";
  h << "# sample_hash: " << sample_hash(c) << "\n";
  h << "# seed: " << c.seed << "\n";
  h << "# params: drift_a_per_time=" << fmt(c.drift_a_per_time) << " volatility_sigma=" << fmt(c.volatility_sigma)
    << " hurst_H=" << fmt(c.hurst_H) << " horizon_T=" << fmt(c.horizon_T) << "\n";
  h << "# grid: uniform grid_n=" << c.grid_n << "\n";
  h << "# centering_mean_lnF: " << fmt(centering.mean_lnF) << "\n";
  h << "# centering_se: " << fmt(centering.standard_error) << "\n";
  h << "# centering_paths: " << centering.n_paths << "\n";
  h << "# tolerances: relative=" << fmt(c.relative_tolerance) << " se_multiplier=" << fmt(c.se_multiplier)
    << " table_energy=" << fmt(c.table_energy_tolerance) << " quadrature=" << fmt(c.quadrature_tolerance) << "\n";
  h << "# partition: path_block=" << kPathBlock << "\n";
  h << "path_id,F,lnF,X\n";
  return h.str();
}

void write_samples(const fs::path& file, const ExperimentConfig& c, const CenteringConstant& centering,
                   const std::vector<FunctionalSample>& samples) {
  ensure_dir(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ResourceError("cannot write " + file.string());
  out << samples_header(c, centering);
  std::string line;
  for (const auto& s : samples) {
    line = std::to_string(s.path_id);
    line += ',';
    line += fmt(s.F);
    line += ',';
    line += fmt(s.lnF);
    line += ',';
    line += fmt(s.X);
    line += '\n';
    out << line;
  }
}

std::optional<XBatch> read_samples(const fs::path& file, const std::string& expected_hash) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  std::string line;
  CenteringConstant centering;
  std::string hash;
  while (std::getline(in, line) && line.rfind('#', 0) == 0) {
    auto value = [&](const std::string& key) -> std::optional<std::string> {
      const std::string prefix = "# " + key + ": ";
      if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
      return std::nullopt;
    };
    if (auto v = value("sample_hash")) hash = *v;
    if (auto v = value("centering_mean_lnF")) centering.mean_lnF = std::stod(*v);
    if (auto v = value("centering_se")) centering.standard_error = std::stod(*v);
    if (auto v = value("centering_paths")) centering.n_paths = std::stoull(*v);
    if (auto v = value("seed")) centering.seed = std::stoull(*v);
  }
  if (hash != expected_hash) return std::nullopt;
  std::vector<double> F;
  std::vector<double> X;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double vals[3];
    const char* p = line.data();
    const char* end = line.data() + line.size();
    p = std::find(p, end, ',') + 1;
    for (int k = 0; k < 3; ++k) {
      const auto res = std::from_chars(p, end, vals[k]);
      if (res.ec != std::errc()) throw ConfigError("corrupt sample cache " + file.string());
      p = res.ptr + 1;
    }
    F.push_back(vals[0]);
    X.push_back(vals[2]);
  }
  return summarize_x_batch(std::move(F), std::move(X), centering);
}

struct SimulationResult {
  XBatch batch;
  BoundReport bracket;
};

SimulationResult simulate_samples(const RunContext& ctx, const KernelTable& table) {
  const auto& c = ctx.config;
  const auto params = c.model();
  CenteringConstant centering;
  {
    Timer t(ctx.err, "centering E[ln F] (" + std::to_string(c.centering_paths) + " paths)");
    centering = estimate_mean_lnF(table, params, c.centering_paths, c.seed);
  }
  std::vector<FunctionalSample> samples;
  {
    Timer t(ctx.err, "sampling " + std::to_string(c.paths) + " paths");
    samples = sample_functionals(table, params, centering, c.seed, 0, c.paths);
  }
  auto bracket = configured(BoundReport("bracket", "T e^{-|a|T + sigma min B^H} <= F <= T e^{|a|T + sigma max B^H}"), c);
  bracket.relative_tolerance = 1e-12;
  const double T = c.horizon_T;
  const double at = std::abs(c.drift_a_per_time) * T;
  std::vector<double> F;
  std::vector<double> X;
  F.reserve(samples.size());
  X.reserve(samples.size());
  for (const auto& s : samples) {
    bracket.check_lower(static_cast<double>(s.path_id), s.F, T * std::exp(-at + c.volatility_sigma * s.min_B));
    bracket.check_upper(static_cast<double>(s.path_id), s.F, T * std::exp(at + c.volatility_sigma * s.max_B));
    F.push_back(s.F);
    X.push_back(s.X);
  }
  write_samples(c.out_dir / kSamplesFile, c, centering, samples);
  return {summarize_x_batch(std::move(F), std::move(X), centering), std::move(bracket)};
}

XBatch load_or_simulate(const RunContext& ctx, const KernelTable& table) {
  const auto& c = ctx.config;
  const fs::path file = c.out_dir / kSamplesFile;
  if (auto cached = read_samples(file, sample_hash(c))) {
    *ctx.err << "[efbm] reusing sample cache " << file.string() << "\n";
    return std::move(*cached);
  }
  if (ctx.no_simulate) {
    throw ConfigError("no sample cache for sample_hash " + sample_hash(c) + " in " + file.string() +
                      "; run 'efbm simulate' with the same config or drop --no-simulate");
  }
  return simulate_samples(ctx, table).batch;
}

// ---------------------------------------------------------------- suites

struct DensityRun {
  DensityEstimate density;
  EnvelopeCheck envelopes;
  std::vector<BoundReport> reports;
};

DensityRun run_density(const RunContext& ctx, const XBatch& batch) {
  const auto& c = ctx.config;
  const auto params = c.model();
  if (c.volatility_sigma == 0.0) throw ConfigError("volatility_sigma = 0: the law of X is a point mass, no density");
  KdeOptions opt;
  if (c.kde_bandwidth_X > 0.0) opt.bandwidth = c.kde_bandwidth_X;
  opt.grid_points = c.kde_grid_points;
  opt.bootstrap = c.bootstrap_resamples;
  opt.seed = c.seed;
  opt.min_tail_samples = c.min_tail_samples;
  DensityRun r;
  {
    Timer t(ctx.err, "kde + bootstrap");
    r.density = kde_log_domain(batch.X, batch.centering.mean_lnF, opt);
  }
  r.envelopes = verify_envelopes(r.density, params, batch);
  auto mass = configured(BoundReport("kde_mass", "|int rho_X - 1| <= 0.01 and |int rho_F - 1| <= 0.02"), c);
  mass.relative_tolerance = 0.0;
  mass.check_upper(0.0, std::abs(r.density.integral() - 1.0), 0.01);
  mass.check_upper(1.0, std::abs(r.density.f_integral() - 1.0), 0.02);
  for (auto* rep : {&r.envelopes.left, &r.envelopes.right, &r.envelopes.remark, &r.envelopes.slope}) {
    rep->relative_tolerance = c.relative_tolerance;
    rep->se_multiplier = c.se_multiplier;
    r.reports.push_back(*rep);
  }
  r.reports.push_back(mass);
  return r;
}

std::vector<BoundReport> tail_suite(const RunContext& ctx, const XBatch& batch) {
  const auto& c = ctx.config;
  const auto params = c.model();
  std::vector<BoundReport> out;
  auto tail = verify_gaussian_tail(batch.X, params, c.tail_points_X);
  tail.relative_tolerance = c.relative_tolerance;
  tail.se_multiplier = c.se_multiplier;
  out.push_back(tail);
  auto mgf = verify_mgf(batch.X, params, c.mgf_lambdas);
  mgf.relative_tolerance = c.relative_tolerance;
  mgf.se_multiplier = c.se_multiplier;
  out.push_back(mgf);
  auto var = configured(BoundReport("var_X", "Var(X) <= sigma^2 T^{2H}"), c);
  var.check_upper(0.0, batch.var_X, params.variance_scale(), batch.var_X_se);
  out.push_back(var);
  return out;
}

NestedOptions nested_options(const ExperimentConfig& c) { return {c.inner_paths, c.theta_stride, c.seed}; }

struct NestedRun {
  NestedBatch batch;
  KernelTable table;
  std::vector<BoundReport> reports;
  WProfile w;
  double var_X = 0.0;
  double var_X_se = 0.0;
  double mean_phi = 0.0;
  double mean_phi_se = 0.0;
};

NestedRun nested_suite(const RunContext& ctx) {
  const auto& c = ctx.config;
  const auto params = c.model();
  auto table = cached_table(ctx, c.nested_grid_n);
  CenteringConstant centering;
  {
    Timer t(ctx.err, "nested-grid centering");
    centering = estimate_mean_lnF(table, params, c.centering_paths, c.seed);
  }
  NestedBatch batch;
  {
    Timer t(ctx.err, "nested batch (" + std::to_string(c.nested_paths) + " outer x " +
                         std::to_string(c.inner_paths) + " inner)");
    batch = nested_batch(table, params, centering.mean_lnF, c.seed, 0, c.nested_paths, nested_options(c));
  }
  NestedRun r{std::move(batch), std::move(table), {}, {}, 0, 0, 0, 0};
  for (auto* rep : {&r.batch.kld2, &r.batch.kld3, &r.batch.phi_upper, &r.batch.ol0}) {
    rep->relative_tolerance = c.relative_tolerance;
    rep->se_multiplier = c.se_multiplier;
    r.reports.push_back(*rep);
  }
  const auto vx = stats::variance_estimate(r.batch.X);
  const auto mp = stats::mean_estimate(r.batch.phi);
  r.var_X = vx.variance;
  r.var_X_se = vx.standard_error;
  r.mean_phi = mp.mean;
  r.mean_phi_se = mp.standard_error;
  auto identity = configured(BoundReport("lfm9", "Var(X) = E[Phi_X] (covariance formula)"), c);
  identity.relative_tolerance = 0.0;
  identity.check_upper(0.0, std::abs(r.var_X - r.mean_phi), 0.0, std::hypot(r.var_X_se, r.mean_phi_se));
  identity.extra = {{"var_X", r.var_X}, {"var_X_se", r.var_X_se}, {"mean_phi", r.mean_phi},
                    {"mean_phi_se", r.mean_phi_se}};
  r.reports.push_back(identity);
  if (c.nested_paths > 0) {
    r.w = estimate_w_X(r.batch.X, r.batch.phi, params, c.w_bin_width_X, c.min_tail_samples);
    for (auto* rep : {&r.w.lower, &r.w.reconstruction}) {
      rep->relative_tolerance = c.relative_tolerance;
      rep->se_multiplier = c.se_multiplier;
      rep->extra["profile"] = to_json(r.w);
      r.reports.push_back(*rep);
    }
  }
  return r;
}

std::vector<BoundReport> dphi_suite(const RunContext& ctx) {
  const auto& c = ctx.config;
  const auto params = c.model();
  const auto table = cached_table(ctx, c.nested_grid_n);
  std::optional<std::size_t> budget;
  if (c.dphi_budget_inner_evals > 0) budget = c.dphi_budget_inner_evals;
  DphiCheck check;
  {
    Timer t(ctx.err, "dphi (" + std::to_string(c.dphi_paths) + " outer, full theta grid)");
    check = dphi_bound_check(table, params, c.seed, 0, c.dphi_paths, nested_options(c), budget);
  }
  auto pointwise = check.pointwise;
  auto integral = check.integral;
  for (auto* rep : {&pointwise, &integral}) {
    rep->relative_tolerance = c.relative_tolerance;
    rep->se_multiplier = c.se_multiplier;
    rep->extra["paths_requested"] = check.paths_requested;
    rep->extra["paths_done"] = check.paths_done;
  }
  // Coarse h_X profile from the same paths, centred by their own mean of ln F.
  if (check.paths_done >= 2) {
    const auto m = stats::mean_estimate(check.lnF).mean;
    std::vector<double> x(check.lnF.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = check.lnF[i] - m;
    const auto w = estimate_w_X(x, check.phi, params, c.w_bin_width_X * 2.0, c.min_tail_samples, check.dphi_integral);
    integral.extra["h_X_profile_low_precision"] = to_json(w);
  }
  return {pointwise, integral};
}

std::vector<BoundReport> clark_ocone_suite(const RunContext& ctx) {
  const auto& c = ctx.config;
  const auto params = c.model();
  const auto fine = cached_table(ctx, c.grid_n);
  ResidualStatistics rf;
  {
    Timer t(ctx.err, "Clark-Ocone residuals n=" + std::to_string(c.grid_n));
    rf = clark_ocone_residual(fine, params, c.seed, 0, c.clark_ocone_paths);
  }
  auto mean = configured(BoundReport("clark_ocone", "mean of F - E[F] - sum E[D_s F | F_s] dB_s is 0"), c);
  mean.relative_tolerance = 0.0;
  mean.check_upper(static_cast<double>(c.grid_n), std::abs(rf.mean), 0.0, rf.standard_error);
  mean.extra = {{"n", c.grid_n}, {"mean", rf.mean}, {"se", rf.standard_error}, {"variance", rf.variance},
                {"variance_se", rf.variance_se}};
  std::vector<BoundReport> out{mean};
  if (c.nested_grid_n < c.grid_n) {
    const auto coarse = cached_table(ctx, c.nested_grid_n);
    const auto rc = clark_ocone_residual(coarse, params, c.seed, 0, c.clark_ocone_paths);
    auto refine = configured(BoundReport("clark_ocone_refinement", "residual variance decreases under grid refinement"), c);
    refine.relative_tolerance = 0.0;
    refine.check_upper(static_cast<double>(c.grid_n), rf.variance, rc.variance);
    refine.extra = {{"coarse_n", c.nested_grid_n}, {"coarse_variance", rc.variance}, {"fine_n", c.grid_n},
                    {"fine_variance", rf.variance}};
    out.push_back(refine);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- commands

int cmd_kernel_verify(const RunContext& ctx) {
  const auto& c = ctx.config;
  const double H = c.hurst_H;
  const double T = c.horizon_T;
  const double c_h = calibrate_ch(H, c.calibration_points) * c.fault_ch_scale;
  const VolterraKernel kernel(H, c_h);
  std::vector<BoundReport> reports;
  auto make = [&](const char* id, const char* statement) {
    auto r = configured(BoundReport(id, statement), c);
    r.relative_tolerance = 0.0;
    r.se_multiplier = 0.0;
    return r;
  };

  auto calib = make("calibration", "|int_0^1 K(1,s)^2 ds - 1| <= 1e-8");
  calib.check_upper(1.0, std::abs(kernel.energy(1.0) - 1.0), 1e-8);
  reports.push_back(calib);

  auto closed = make("ch_closed_form", "|c_H - sqrt(H(2H-1)/B(2-2H,H-1/2))| / c_H <= 1e-8");
  const double ref = closed_form_ch(H);
  closed.check_upper(H, std::abs(c_h - ref) / ref, 1e-8);
  reports.push_back(closed);

  auto energy = make("energy_continuous", "|int_0^t K(t,s)^2 ds - t^{2H}| / t^{2H} small");
  for (double t : {0.5 * T, T, 2.0 * T}) {
    const double target = std::pow(t, 2.0 * H);
    energy.check_upper(t, std::abs(kernel.energy(t) - target) / target, c.continuous_energy_tolerance);
  }
  reports.push_back(energy);

  const KernelTable table = c.fault_ch_scale == 1.0 ? cached_table(ctx, c.grid_n) : cached_table(ctx, c.grid_n, c_h);
  auto discrete = make("energy_discrete", "max_i |sum_j c_ij^2 dt - t_i^{2H}| <= table tolerance");
  discrete.check_upper(T, table.metadata().max_energy_defect, c.table_energy_tolerance);
  reports.push_back(discrete);

  auto cov = make("covariance_reproduction", "|sum_j c_nj c_{n/2,j} dt - R_H(T, T/2)| <= table tolerance");
  {
    const std::size_t n = table.cells();
    const std::size_t h = n / 2;
    double s = 0.0;
    for (std::size_t j = 1; j <= h; ++j) s += table.coefficient(n, j) * table.coefficient(h, j) * table.step(j);
    cov.check_upper(table.grid()[h], std::abs(s - covariance(H, T, table.grid()[h])), c.table_energy_tolerance);
  }
  reports.push_back(cov);

  auto agg = make("aggregate", "|int_0^T (int_theta^T K(s,theta) ds)^2 dtheta - T^{2H+2}/(2H+2)| relative");
  {
    const double target = std::pow(T, 2.0 * H + 2.0) / (2.0 * H + 2.0);
    agg.check_upper(T, std::abs(aggregate_time_integral_energy(kernel, T) - target) / target, c.aggregate_tolerance);
  }
  reports.push_back(agg);

  auto shape = make("kernel_shape", "K(t,t) = 0, K >= 0, K(t,s) non-decreasing in t on the table");
  {
    const auto& v = table.values();
    double worst_diag = 0.0;
    double worst_neg = 0.0;
    double worst_drop = 0.0;
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      worst_diag = std::max(worst_diag, std::abs(v(i, i)));
      for (Eigen::Index j = 0; j <= i; ++j) {
        worst_neg = std::max(worst_neg, -v(i, j));
        if (j < i) worst_drop = std::max(worst_drop, v(i - 1, j) - v(i, j));
      }
    }
    shape.check_upper(0.0, worst_diag, 0.0);
    shape.check_upper(1.0, worst_neg, 0.0);
    shape.check_upper(2.0, worst_drop, 1e-12);
  }
  reports.push_back(shape);

  nlohmann::json doc{{"command", "kernel-verify"},
                     {"provenance", provenance(c)},
                     {"c_h", c_h},
                     {"c_h_closed_form", ref},
                     {"fault_ch_scale", c.fault_ch_scale},
                     {"reports", reports_json(reports)}};
  std::vector<std::string> failures;
  for (const auto& r : reports) {
    if (!r.passed()) failures.push_back(r.bound_id);
  }
  doc["failures"] = failures;
  write_json(c.out_dir / "kernel_verify.json", doc);
  return emit(ctx, "kernel-verify", doc, reports);
}

int cmd_simulate(const RunContext& ctx) {
  const auto& c = ctx.config;
  const auto table = cached_table(ctx, c.grid_n);
  auto sim = simulate_samples(ctx, table);
  if (c.dump_paths > 0) {
    std::ostringstream csv;
    csv << "# efbm path dump\n# config_hash: " << config_hash(c) << "\n# seed: " << c.seed
        << "\n# grid: uniform grid_n=" << c.grid_n << " horizon_T=" << fmt(c.horizon_T) << "\npath_id,t,dB,B_H\n";
    for (std::size_t p = 0; p < std::min(c.dump_paths, c.paths); ++p) {
      const auto path = sample_fbm_volterra(table, {c.seed, StreamPurpose::increments, p, 0});
      for (std::size_t i = 0; i <= table.cells(); ++i) {
        csv << p << ',' << fmt(table.grid()[i]) << ',' << fmt(i == 0 ? 0.0 : (*path.increments)[i - 1]) << ','
            << fmt(path.values[i]) << '\n';
      }
    }
    write_text(c.out_dir / "paths.csv", csv.str());
  }
  const auto& b = sim.batch;
  const auto params = c.model();
  nlohmann::json doc{{"command", "simulate"},
                     {"provenance", provenance(c)},
                     {"samples_file", kSamplesFile},
                     {"centering", to_json(b.centering)},
                     {"summary",
                      {{"paths", b.X.size()},
                       {"mean_X", b.mean_X},
                       {"mean_X_se", b.mean_X_se},
                       {"var_X", b.var_X},
                       {"var_X_se", b.var_X_se},
                       {"mean_F", b.mean_F},
                       {"mean_F_se", b.mean_F_se},
                       {"var_F", b.var_F},
                       {"var_F_se", b.var_F_se},
                       {"analytic_mean_F", analytic_mean_F(params)},
                       {"analytic_var_F", analytic_second_moment_F(params) - std::pow(analytic_mean_F(params), 2)}}},
                     {"reports", reports_json({sim.bracket})}};
  write_json(c.out_dir / "simulate.json", doc);
  return emit(ctx, "simulate", doc, {sim.bracket});
}

int cmd_density(const RunContext& ctx) {
  const auto& c = ctx.config;
  const auto table = cached_table(ctx, c.grid_n);
  const auto batch = load_or_simulate(ctx, table);
  const auto run = run_density(ctx, batch);
  const double s2 = c.model().variance_scale();
  std::ostringstream csv;
  csv << "# efbm density plot data\n# config_hash: " << config_hash(c) << "\n# seed: " << c.seed
      << "\n# bandwidth_X: " << fmt(run.density.bandwidth) << "\nz,x,rho_X,rho_X_se,rho_F,rho_F_se,envelope_shape,implied_c\n";
  const auto& d = run.density;
  for (std::size_t j = 0; j < d.grid.size(); ++j) {
    const double z = d.grid[j];
    const double shape = std::exp(-z * z / ((z <= 0.0 ? 8.0 : 2.0) * s2)) / d.f_grid[j];
    csv << fmt(z) << ',' << fmt(d.f_grid[j]) << ',' << fmt(d.density[j]) << ',' << fmt(d.se[j]) << ','
        << fmt(d.f_density[j]) << ',' << fmt(d.f_se[j]) << ',' << fmt(shape) << ',' << fmt(d.f_density[j] / shape)
        << '\n';
  }
  write_text(c.out_dir / "density_plot.csv", csv.str());
  nlohmann::json doc{{"command", "density"},
                     {"provenance", provenance(c)},
                     {"centering", to_json(batch.centering)},
                     {"density", to_json(run.density)},
                     {"profiles",
                      {to_json(run.envelopes.left_profile), to_json(run.envelopes.right_profile),
                       to_json(run.envelopes.remark_profile)}},
                     {"reports", reports_json(run.reports)}};
  write_json(c.out_dir / "density.json", doc);
  return emit(ctx, "density", doc, run.reports);
}

namespace {

struct Suite {
  std::string name;
  std::vector<std::string> ids;
};

const std::vector<Suite>& suites() {
  static const std::vector<Suite> s{
      {"tails", {"jkvm1b", "mgf", "var_X"}},
      {"envelopes", {"kl1", "kl2", "remark", "kl2_slope", "kde_mass"}},
      {"nested", {"kld2", "kld3", "phi_upper", "ol0", "lfm9", "w_X", "w_X_reconstruction"}},
      {"dphi", {"dphi", "dphi_int"}},
      {"clark_ocone", {"clark_ocone", "clark_ocone_refinement"}},
  };
  return s;
}

}  // namespace

int cmd_bounds(const RunContext& ctx) {
  const auto& c = ctx.config;
  std::string selected_suite;
  if (ctx.only) {
    for (const auto& s : suites()) {
      if (std::find(s.ids.begin(), s.ids.end(), *ctx.only) != s.ids.end()) selected_suite = s.name;
    }
    if (selected_suite.empty()) throw ConfigError("unknown bound id '" + *ctx.only + "'");
  }
  auto wanted = [&](const std::string& suite) { return selected_suite.empty() || selected_suite == suite; };
  std::vector<BoundReport> reports;
  auto add = [&](const std::vector<BoundReport>& rs) { reports.insert(reports.end(), rs.begin(), rs.end()); };
  if (wanted("tails") || wanted("envelopes")) {
    const auto table = cached_table(ctx, c.grid_n);
    const auto batch = load_or_simulate(ctx, table);
    if (wanted("tails")) add(tail_suite(ctx, batch));
    if (wanted("envelopes")) add(run_density(ctx, batch).reports);
  }
  if (wanted("nested")) add(nested_suite(ctx).reports);
  if (wanted("dphi")) add(dphi_suite(ctx));
  if (wanted("clark_ocone")) add(clark_ocone_suite(ctx));
  if (ctx.only) {
    std::erase_if(reports, [&](const BoundReport& r) { return r.bound_id != *ctx.only; });
  }
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& r : reports) {
    summary.push_back({{"bound_id", r.bound_id}, {"location", r.statement}, {"status", to_string(r.status())}});
  }
  nlohmann::json doc{{"command", "bounds"}, {"provenance", provenance(c)}, {"summary", summary},
                     {"reports", reports_json(reports)}};
  write_json(c.out_dir / (ctx.only ? "bounds_" + *ctx.only + ".json" : std::string("bounds.json")), doc);
  return emit(ctx, "bounds", doc, reports);
}

int cmd_malliavin(const RunContext& ctx) {
  const auto& c = ctx.config;
  auto run = nested_suite(ctx);
  const auto& table = run.table;
  const auto bound = dX_upper_bound(table, c.volatility_sigma);
  std::ostringstream csv;
  csv << "# efbm malliavin summary\n# config_hash: " << config_hash(c) << "\n# seed: " << c.seed
      << "\n# nested_grid_n: " << c.nested_grid_n << " outer: " << c.nested_paths << " inner: " << c.inner_paths
      << "\ntheta,mean_dX,mean_cond_dX,bound_sigma_K,margin\n";
  for (std::size_t m = 0; m <= table.cells(); ++m) {
    csv << fmt(table.grid()[m]) << ',' << fmt(run.batch.mean_dX[m]) << ',' << fmt(run.batch.mean_cond_dX[m]) << ','
        << fmt(bound[m]) << ',' << fmt(bound[m] - run.batch.mean_dX[m]) << '\n';
  }
  write_text(c.out_dir / "malliavin_summary.csv", csv.str());
  nlohmann::json doc{{"command", "malliavin"},
                     {"provenance", provenance(c)},
                     {"phi",
                      {{"mean", run.mean_phi}, {"mean_se", run.mean_phi_se}, {"var_X", run.var_X},
                       {"var_X_se", run.var_X_se}}},
                     {"reports", reports_json(run.reports)}};
  write_json(c.out_dir / "malliavin.json", doc);
  return emit(ctx, "malliavin", doc, run.reports);
}

int cmd_report(const RunContext& ctx) {
  const auto& c = ctx.config;
  nlohmann::json all = nlohmann::json::array();
  nlohmann::json sources = nlohmann::json::array();
  int code = kPass;
  for (const char* name : {"kernel_verify.json", "simulate.json", "density.json", "malliavin.json", "bounds.json"}) {
    const fs::path file = c.out_dir / name;
    if (!fs::exists(file)) continue;
    std::ifstream in(file);
    const auto doc = nlohmann::json::parse(in);
    sources.push_back({{"file", name}, {"config_hash", doc.at("provenance").at("config_hash")}});
    for (const auto& r : doc.at("reports")) {
      all.push_back(r);
      const auto status = r.at("status").get<std::string>();
      if (status == "fail") code = kViolation;
      if (status == "partial" && code == kPass) code = kResourceExceeded;
    }
  }
  if (sources.empty()) throw ConfigError("no reports in " + c.out_dir.string() + "; run a suite first");
  nlohmann::json doc{{"command", "report"}, {"provenance", provenance(c)}, {"sources", sources}, {"reports", all}};
  write_json(c.out_dir / "report.json", doc);
  if (ctx.json) {
    *ctx.out << doc.dump(2) << "\n";
  } else {
    print_table(*ctx.out, "report", all);
  }
  return code;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"efbm: simulation and verification of exponential functionals of fractional Brownian motion"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool json = false;
  std::string only;
  std::optional<std::size_t> paths;
  std::optional<std::size_t> inner;
  std::optional<std::size_t> grid;
  bool no_simulate = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat JSON config file");
    sub->add_option("--seed", seed, "experiment seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_flag("--json", json, "print the report as JSON");
    sub->add_option("--paths", paths, "outer Monte Carlo path count for every suite");
    sub->add_option("--inner", inner, "inner paths per conditional estimate");
    sub->add_option("--grid", grid, "grid size n of the main kernel table");
  };
  std::map<std::string, std::function<int(const RunContext&)>> handlers{
      {"kernel-verify", cmd_kernel_verify}, {"simulate", cmd_simulate}, {"density", cmd_density},
      {"bounds", cmd_bounds},               {"malliavin", cmd_malliavin}, {"report", cmd_report}};
  std::map<std::string, CLI::App*> subs;
  subs["kernel-verify"] = app.add_subcommand("kernel-verify", "kernel identity suite");
  subs["simulate"] = app.add_subcommand("simulate", "sample F and X with provenance headers");
  subs["density"] = app.add_subcommand("density", "density of X and F with envelope checks");
  subs["bounds"] = app.add_subcommand("bounds", "all inequality suites");
  subs["malliavin"] = app.add_subcommand("malliavin", "nested Monte Carlo Malliavin suite");
  subs["report"] = app.add_subcommand("report", "collect reports from the output directory");
  for (auto& [name, sub] : subs) add_common(sub);
  subs["bounds"]->add_option("--only", only, "run a single bound id");
  for (const char* name : {"density", "bounds"}) subs[name]->add_flag("--no-simulate", no_simulate, "require cached samples");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kPass;
  } catch (const CLI::ParseError& e) {
    err << "efbm: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    RunContext ctx;
    ctx.out = &out;
    ctx.err = &err;
    ctx.json = json;
    ctx.no_simulate = no_simulate;
    if (!only.empty()) ctx.only = only;
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (paths) cfg.paths = cfg.nested_paths = cfg.dphi_paths = cfg.clark_ocone_paths = *paths;
    if (inner) cfg.inner_paths = *inner;
    if (grid) cfg.grid_n = *grid;
    cfg.validate();
    ctx.config = cfg;
    err << "[efbm] workers=" << worker_count() << " config_hash=" << config_hash(cfg) << "\n";
    for (auto& [name, sub] : subs) {
      if (sub->parsed()) return handlers.at(name)(ctx);
    }
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "efbm: configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DomainError& e) {
    err << "efbm: configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ResourceError& e) {
    err << "efbm: resource limit: " << e.what() << "\n";
    return kResourceExceeded;
  } catch (const std::bad_alloc&) {
    err << "efbm: out of memory\n";
    return kResourceExceeded;
  }
}

}  // namespace efbm::cli
