// End-to-end acceptance run: one PASS/FAIL line per criterion.

#include "efbm/density.hpp"
#include "efbm/functional.hpp"
#include "efbm/kernel.hpp"
#include "efbm/kernel_table.hpp"
#include "efbm/malliavin.hpp"
#include "efbm/parallel.hpp"
#include "efbm/paths.hpp"
#include "efbm/stats.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

using namespace efbm;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20240601;

// Tolerances and sizes.
constexpr double kContinuousEnergyTol = 1e-6;
constexpr double kDiscreteEnergyTol = 5e-3;
constexpr double kAggregateTol = 1e-4;
constexpr double kSeMultiplier = 3.0;
constexpr double kFdRelTol = 1e-3;
constexpr double kGoldenRelTol = 1e-6;
constexpr std::size_t kLawPaths = 100000;
constexpr std::size_t kKsPaths = 10000;
constexpr std::size_t kMomentPaths = 100000;
constexpr std::size_t kNestedPaths = 10000;
constexpr std::size_t kNestedGrid = 64;
constexpr std::size_t kInnerPaths = 200;
constexpr std::size_t kStride = 4;
constexpr std::size_t kFdPaths = 20;
constexpr std::size_t kTailPaths = 1000000;
constexpr std::size_t kCenteringPaths = 100000;
constexpr std::size_t kGrid = 256;
constexpr std::size_t kResidualPaths = 10000;
constexpr double kWBinWidth = 0.1;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<void(Outcome&)> body;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

// Shared Monte Carlo runs, computed on first use.
struct Shared {
  std::optional<KernelTable> grid_table;
  std::optional<KernelTable> nested_table;
  std::optional<XBatch> tail_batch;
  std::optional<NestedBatch> nested;
  double nested_seconds = 0.0;
  double tail_seconds = 0.0;
  const ModelParams params{};

  const KernelTable& grid() {
    if (!grid_table) grid_table = build_kernel_table(params.hurst, params.horizon, kGrid);
    return *grid_table;
  }
  const KernelTable& coarse() {
    if (!nested_table) nested_table = build_kernel_table(params.hurst, params.horizon, kNestedGrid);
    return *nested_table;
  }
  const XBatch& tails() {
    if (!tail_batch) {
      const auto start = std::chrono::steady_clock::now();
      const auto centering = estimate_mean_lnF(grid(), params, kCenteringPaths, kSeed);
      tail_batch = sample_X_batch(grid(), params, centering, kTailPaths, kSeed);
      tail_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    return *tail_batch;
  }
  const NestedBatch& nested_run() {
    if (!nested) {
      const auto start = std::chrono::steady_clock::now();
      const auto centering = estimate_mean_lnF(coarse(), params, kCenteringPaths, kSeed);
      nested = nested_batch(coarse(), params, centering.mean_lnF, kSeed, 0, kNestedPaths,
                            {kInnerPaths, kStride, kSeed});
      nested_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    return *nested;
  }
};

void kernel_energy(Outcome& o) {
  double worst_cont = 0.0;
  double worst_disc = 0.0;
  for (double H : {0.55, 0.7, 0.9}) {
    const VolterraKernel k(H);
    const auto table = build_kernel_table(H, 2.0, kGrid);
    for (double t : {0.5, 1.0, 2.0}) {
      const double target = std::pow(t, 2 * H);
      worst_cont = std::max(worst_cont, std::abs(k.energy(t) - target) / target);
      worst_disc = std::max(worst_disc, std::abs(table.discrete_energy(table.node_index(t)) - target) / target);
    }
  }
  o.detail << "max rel defect continuous " << sci(worst_cont) << " (< " << sci(kContinuousEnergyTol)
           << "), discrete n=256 " << sci(worst_disc) << " (< " << sci(kDiscreteEnergyTol) << ")";
  o.require(worst_cont < kContinuousEnergyTol, "continuous energy");
  o.require(worst_disc < kDiscreteEnergyTol, "discrete energy");
}

void aggregate_identity(Outcome& o) {
  for (auto [H, T] : {std::pair{0.7, 1.0}, std::pair{0.6, 2.0}}) {
    const double target = std::pow(T, 2 * H + 2) / (2 * H + 2);
    const double rel = std::abs(aggregate_time_integral_energy(VolterraKernel(H), T) - target) / target;
    o.detail << "(H=" << H << ",T=" << T << ") rel " << sci(rel) << "; ";
    o.require(rel < kAggregateTol, "aggregate identity");
  }
}

void path_law(Shared& s, Outcome& o) {
  const auto& t = s.grid();
  const std::size_t pairs[10][2] = {{16, 16},  {32, 128}, {64, 64},   {64, 192}, {100, 37},
                                    {128, 128}, {128, 256}, {200, 250}, {256, 256}, {8, 256}};
  std::vector<std::vector<double>> cols(257);
  for (const auto& p : pairs) {
    cols[p[0]].reserve(kLawPaths);
    cols[p[1]].reserve(kLawPaths);
  }
  std::vector<double> at_T_volterra;
  for_each_path_block(t, kSeed, StreamPurpose::increments, 0, kLawPaths, [&](const PathBlock& b) {
    for (Eigen::Index c = 0; c < b.values.cols(); ++c) {
      for (std::size_t node = 1; node <= 256; ++node) {
        if (cols[node].capacity() > 0) cols[node].push_back(b.values(static_cast<Eigen::Index>(node) - 1, c));
      }
      if (at_T_volterra.size() < kKsPaths) at_T_volterra.push_back(b.values(255, c));
    }
  });
  double worst = 0.0;
  for (const auto& p : pairs) {
    const auto est = stats::covariance_estimate(cols[p[0]], cols[p[1]]);
    const double ref = covariance(s.params.hurst, t.grid()[p[0]], t.grid()[p[1]]);
    const double z = std::abs(est.covariance - ref) / est.standard_error;
    worst = std::max(worst, z);
    o.require(z <= kSeMultiplier, "covariance at (" + std::to_string(p[0]) + "," + std::to_string(p[1]) + ")");
  }
  const CholeskySampler chol(s.params.hurst, t.grid());
  std::vector<double> at_T_chol;
  for (std::uint64_t p = 0; p < kKsPaths; ++p) {
    at_T_chol.push_back(chol.sample({kSeed, StreamPurpose::cholesky, p, 0}).values.back());
  }
  const double ks = stats::ks_two_sample(at_T_chol, at_T_volterra);
  const double crit = stats::ks_critical_value(kKsPaths, kKsPaths, 0.01);
  o.detail << "10 pairs, max |cov - R_H| / SE = " << sci(worst) << " (<= 3); KS " << sci(ks) << " (< " << sci(crit)
           << ")";
  o.require(ks < crit, "KS");
}

void moments(Shared& s, Outcome& o) {
  const auto centering = estimate_mean_lnF(s.grid(), s.params, 1000, kSeed);
  const auto batch = sample_X_batch(s.grid(), s.params, centering, kMomentPaths, kSeed + 1);
  const double mean = analytic_mean_F(s.params);
  const double var = analytic_second_moment_F(s.params) - mean * mean;
  const double zm = std::abs(batch.mean_F - mean) / batch.mean_F_se;
  const double zv = std::abs(batch.var_F - var) / batch.var_F_se;
  o.detail << "E[F] " << batch.mean_F << " vs " << mean << " (" << sci(zm) << " SE); Var F " << batch.var_F << " vs "
           << var << " (" << sci(zv) << " SE)";
  o.require(zm <= kSeMultiplier, "mean");
  o.require(zv <= kSeMultiplier, "variance");
}

void derivative_bounds(Shared& s, Outcome& o) {
  const auto& n = s.nested_run();
  o.detail << n.kld2.points_checked << "+" << n.kld3.points_checked << "+" << n.phi_upper.points_checked
           << " checks, violations kld2/kld3/phi " << n.kld2.violations << "/" << n.kld3.violations << "/"
           << n.phi_upper.violations;
  o.require(n.kld2.violations == 0 && n.kld2.points_checked > 0, "D X bound");
  o.require(n.kld3.violations == 0 && n.kld3.points_checked > 0, "D D X bound");
  o.require(n.phi_upper.violations == 0 && n.phi_upper.points_checked > 0, "Phi bound");
  const auto& t = s.coarse();
  const ModelParams params{0.0, 1.0, s.params.hurst, s.params.horizon};
  double worst1 = 0.0;
  double worst2 = 0.0;
  auto lnF = [&](std::vector<double> inc) { return std::log(functional_F(fbm_from_bm(t, std::move(inc)), params)); };
  for (std::uint64_t p = 0; p < kFdPaths; ++p) {
    const auto path = sample_fbm_volterra(t, {kSeed, StreamPurpose::test, p, 0});
    const auto d1 = dX(path, t, params);
    const auto d2 = d2X(path, t, params);
    const double eps1 = 1e-6;
    for (std::size_t m = 0; m < t.cells(); ++m) {
      auto up = *path.increments;
      auto dn = *path.increments;
      up[m] += eps1;
      dn[m] -= eps1;
      const double fd = (lnF(up) - lnF(dn)) / (2 * eps1);
      worst1 = std::max(worst1, std::abs(d1[m] - fd) / std::abs(fd));
    }
    const double eps2 = 1e-3 * std::sqrt(t.step(1));
    const double scale = d2.cwiseAbs().maxCoeff();
    for (std::size_t j = p % 7; j < t.cells(); j += 9) {
      for (std::size_t k = j; k < t.cells(); k += 13) {
        auto x = [&](double sj, double sk) {
          auto inc = *path.increments;
          inc[j] += sj * eps2;
          inc[k] += sk * eps2;
          return lnF(inc);
        };
        const double fd = (x(1, 1) - x(1, -1) - x(-1, 1) + x(-1, -1)) / (4 * eps2 * eps2);
        worst2 = std::max(worst2, std::abs(d2(j, k) - fd) / std::max(std::abs(fd), 1e-2 * scale));
      }
    }
  }
  o.detail << "; FD rel err first " << sci(worst1) << ", second " << sci(worst2) << " (< " << sci(kFdRelTol) << ")";
  o.require(worst1 < kFdRelTol, "first-order FD");
  o.require(worst2 < kFdRelTol, "second-order FD");
}

void variance_identity(Shared& s, Outcome& o) {
  const auto& n = s.nested_run();
  const auto vx = stats::variance_estimate(n.X);
  const auto mp = stats::mean_estimate(n.phi);
  const double se = std::hypot(vx.standard_error, mp.standard_error);
  const double gap = vx.variance - mp.mean;
  o.detail << "Var X " << vx.variance << " +- " << sci(vx.standard_error) << ", E Phi " << mp.mean << " +- "
           << sci(mp.standard_error) << ", gap " << sci(gap) << " (" << sci(std::abs(gap) / se) << " SE)";
  o.require(std::abs(gap) <= kSeMultiplier * se, "variance identity");
}

void gaussian_tail(Shared& s, Outcome& o) {
  const auto& b = s.tails();
  const std::vector<double> pts{-0.5, -1.0, -1.5, -2.0};
  const auto r = verify_gaussian_tail(b.X, s.params, pts);
  for (const auto& p : r.points) o.detail << "P(X<=" << p.x << ")=" << sci(p.lhs) << "<=" << sci(p.rhs) << " ";
  o.require(r.violations == 0 && r.points_checked == 4, "tail bound");
}

void mgf(Shared& s, Outcome& o) {
  const auto& b = s.tails();
  const std::vector<double> lambdas{0.5, 1.0, 2.0};
  const auto r = verify_mgf(b.X, s.params, lambdas);
  for (const auto& p : r.points) o.detail << "l=" << p.x << ": " << sci(p.lhs) << "<=" << sci(p.rhs) << " ";
  o.require(r.violations == 0 && r.points_checked == 3, "mgf bound");
}

nlohmann::json profile_json(const EnvelopeProfile& p) { return {{"tail", p.tail}, {"z", p.z}, {"implied", p.implied}}; }

void envelopes(Shared& s, Outcome& o, const fs::path& golden, bool update) {
  const auto& b = s.tails();
  const auto d = kde_log_domain(b.X, b.centering.mean_lnF, {std::nullopt, 1024, 100, kSeed, 50});
  const auto e = verify_envelopes(d, s.params, b);
  for (const auto* p : {&e.left_profile, &e.right_profile, &e.remark_profile}) {
    o.detail << p->tail << " inner " << sci(p->inner_max) << " outer " << sci(p->outer_max) << "; ";
  }
  o.require(e.left_profile.conclusive && e.left.violations == 0, "left tail (k=8) rule");
  o.require(e.right_profile.conclusive && e.right.violations == 0, "right tail (k=2) rule");
  o.require(e.remark_profile.conclusive && e.remark.violations == 0, "Gaussian left-tail shape");
  const nlohmann::json current{{"seed", kSeed},
                               {"paths", kTailPaths},
                               {"grid_n", kGrid},
                               {"profiles",
                                {profile_json(e.left_profile), profile_json(e.right_profile),
                                 profile_json(e.remark_profile)}}};
  if (update) {
    fs::create_directories(golden.parent_path());
    std::ofstream(golden) << current.dump(1) << "\n";
    o.detail << "golden written";
    return;
  }
  std::ifstream in(golden);
  if (!in) {
    o.require(false, "golden file " + golden.string() + " missing (run with --update-golden)");
    return;
  }
  const auto ref = nlohmann::json::parse(in);
  double worst = 0.0;
  bool shape_ok = ref.at("profiles").size() == 3;
  for (std::size_t k = 0; shape_ok && k < 3; ++k) {
    const auto z0 = ref["profiles"][k]["z"].get<std::vector<double>>();
    const auto c0 = ref["profiles"][k]["implied"].get<std::vector<double>>();
    const auto z1 = current["profiles"][k]["z"].get<std::vector<double>>();
    const auto c1 = current["profiles"][k]["implied"].get<std::vector<double>>();
    if (z0.size() != z1.size()) {
      shape_ok = false;
      break;
    }
    for (std::size_t i = 0; i < z0.size(); ++i) {
      worst = std::max(worst, std::abs(z0[i] - z1[i]) / std::max(1.0, std::abs(z0[i])));
      worst = std::max(worst, std::abs(c0[i] - c1[i]) / std::max(std::abs(c0[i]), 1e-300));
    }
  }
  o.detail << "golden max rel diff " << sci(worst);
  o.require(shape_ok && worst <= kGoldenRelTol, "golden regression");
}

void w_bound(Shared& s, Outcome& o) {
  const auto& n = s.nested_run();
  const auto w = estimate_w_X(n.X, n.phi, s.params, kWBinWidth, 50);
  std::size_t positive = 0;
  for (std::size_t k = 0; k < w.z.size(); ++k) positive += (w.resolved[k] && w.z[k] > 0.0) ? 1 : 0;
  o.detail << positive << " resolved bins z>0, checked " << w.lower.points_checked << ", violations "
           << w.lower.violations << ", max excess " << sci(w.lower.max_excess);
  o.require(positive > 0 && w.lower.points_checked == positive, "resolved bins");
  o.require(w.lower.violations == 0, "w_X lower bound");
}

void clark_ocone(Shared& s, Outcome& o) {
  const auto coarse = clark_ocone_residual(s.coarse(), s.params, kSeed, 0, kResidualPaths);
  const auto fine = clark_ocone_residual(s.grid(), s.params, kSeed, 0, kResidualPaths);
  o.detail << "n=64 mean " << sci(coarse.mean) << " +- " << sci(coarse.standard_error) << " var " << sci(coarse.variance)
           << "; n=256 mean " << sci(fine.mean) << " +- " << sci(fine.standard_error) << " var " << sci(fine.variance);
  o.require(std::abs(coarse.mean) <= kSeMultiplier * coarse.standard_error, "mean at n=64");
  o.require(std::abs(fine.mean) <= kSeMultiplier * fine.standard_error, "mean at n=256");
  o.require(fine.variance < coarse.variance, "variance decrease");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"efbm acceptance suite"};
  bool update_golden = false;
  std::string golden_dir = EFBM_GOLDEN_DIR;
  std::vector<int> only;
  app.add_flag("--update-golden", update_golden, "rewrite the archived envelope profiles");
  app.add_option("--golden-dir", golden_dir, "directory of golden files");
  app.add_option("--only", only, "criterion numbers to run");
  CLI11_PARSE(app, argc, argv);

  Shared shared;
  const fs::path golden = fs::path(golden_dir) / "envelope_profiles.json";
  // Budgets include the shared Monte Carlo run a criterion triggers first.
  const std::vector<Criterion> criteria{
      {1, "kernel energy identity", 10, kernel_energy},
      {2, "double-integral identity", 10, aggregate_identity},
      {3, "path-law validation", 300, [&](Outcome& o) { path_law(shared, o); }},
      {4, "moment oracles", 300, [&](Outcome& o) { moments(shared, o); }},
      {5, "derivative bounds", 900, [&](Outcome& o) { derivative_bounds(shared, o); }},
      {6, "variance identity", 900, [&](Outcome& o) { variance_identity(shared, o); }},
      {7, "Gaussian tail bound", 600, [&](Outcome& o) { gaussian_tail(shared, o); }},
      {8, "MGF domination", 600, [&](Outcome& o) { mgf(shared, o); }},
      {9, "envelope boundedness", 600, [&](Outcome& o) { envelopes(shared, o, golden, update_golden); }},
      {10, "w_X bound", 900, [&](Outcome& o) { w_bound(shared, o); }},
      {11, "Clark-Ocone residual", 600, [&](Outcome& o) { clark_ocone(shared, o); }},
  };

  std::cout << "efbm acceptance (workers=" << worker_count() << ", seed=" << kSeed << ")\n" << std::flush;
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.require(seconds <= c.budget_seconds, "runtime budget " + std::to_string(c.budget_seconds) + " s");
    if (!o.pass) ++failed;
    std::printf("%s [%2d] %-26s %7.1fs  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), seconds,
                o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%s: %d criteria failed\n", failed == 0 ? "ACCEPTED" : "REJECTED", failed);
  return failed == 0 ? 0 : 1;
}
