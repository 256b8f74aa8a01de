#include "efbm/malliavin.hpp"

#include "efbm/errors.hpp"
#include "efbm/functional.hpp"
#include "efbm/parallel.hpp"
#include "efbm/rng.hpp"
#include "efbm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace efbm {
namespace {

using Eigen::Index;

struct OuterState {
  std::vector<double> q;
  Eigen::VectorXd e;  // exp(a t_i + sigma B_i), nodes 1..n
  double e0 = 1.0;
  double F = 0.0;
  Eigen::VectorXd w;  // q_i e_i / F, nodes 1..n
};

OuterState outer_state(const FbmPath& path, const KernelTable& table, const ModelParams& params) {
  const std::size_t n = table.cells();
  if (path.values.size() != n + 1) throw DimensionMismatch("path is not on the kernel table grid");
  OuterState s;
  s.q = trapezoid_weights(table.grid());
  s.e.resize(static_cast<Index>(n));
  s.F = s.q[0];
  for (std::size_t i = 1; i <= n; ++i) {
    const double e = std::exp(params.drift * table.grid()[i] + params.volatility * path.values[i]);
    s.e(static_cast<Index>(i - 1)) = e;
    s.F += s.q[i] * e;
  }
  s.w.resize(static_cast<Index>(n));
  for (std::size_t i = 1; i <= n; ++i) s.w(static_cast<Index>(i - 1)) = s.q[i] * s.e(static_cast<Index>(i - 1)) / s.F;
  return s;
}

std::vector<double> dX_from_state(const OuterState& s, const KernelTable& table, double sigma) {
  const std::size_t n = table.cells();
  const Eigen::VectorXd g = table.coefficients().transpose().triangularView<Eigen::Upper>() * s.w;
  std::vector<double> out(n + 1, 0.0);
  for (std::size_t m = 0; m < n; ++m) out[m] = sigma * g(static_cast<Index>(m));
  return out;
}

Eigen::MatrixXd d2X_from_state(const OuterState& s, const KernelTable& table, double sigma,
                               const std::vector<double>& dx) {
  const auto n = static_cast<Index>(table.cells());
  const Eigen::MatrixXd& c = table.coefficients();
  const Eigen::MatrixXd wc = s.w.asDiagonal() * c;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n + 1, n + 1);
  out.topLeftCorner(n, n).noalias() = sigma * sigma * c.transpose() * wc;
  for (Index r = 0; r < n; ++r) {
    for (Index m = 0; m < n; ++m) out(r, m) -= dx[static_cast<std::size_t>(r)] * dx[static_cast<std::size_t>(m)];
  }
  return out;
}

// Conditional means N_{i,m} = sum_{k<=m} c_ik dB_k for rows i = 1..n, advanced one cell at a time.
class PartialMeans {
 public:
  PartialMeans(const KernelTable& table, const std::vector<double>& dB)
      : table_(table), dB_(dB), values_(Eigen::VectorXd::Zero(static_cast<Index>(table.cells()))) {}

  void advance_to(std::size_t m) {
    const auto n = static_cast<Index>(table_.cells());
    for (; node_ < m; ++node_) {
      const auto col = static_cast<Index>(node_);
      values_.segment(col, n - col) += dB_[node_] * table_.coefficients().col(col).segment(col, n - col);
    }
  }
  const Eigen::VectorXd& values() const { return values_; }

 private:
  const KernelTable& table_;
  const std::vector<double>& dB_;
  Eigen::VectorXd values_;
  std::size_t node_ = 0;
};

// Inner futures after node m: columns are inner paths (the second half are the
// antithetic partners of the first half); rows 1..n hold q_i e_i / F.
Eigen::MatrixXd inner_weights(const KernelTable& table, const ModelParams& params, const OuterState& outer,
                              const Eigen::VectorXd& partial_means, std::size_t m, std::size_t inner,
                              std::uint64_t seed, std::uint64_t outer_id) {
  const std::size_t n = table.cells();
  const auto f = static_cast<Index>(n - m);
  const auto pairs = static_cast<Index>(inner / 2);
  const auto cols = 2 * pairs;
  RandomStream rng(seed, StreamPurpose::inner, outer_id, m);
  Eigen::MatrixXd z(f, pairs);
  for (Index k = 0; k < pairs; ++k) {
    for (Index j = 0; j < f; ++j) z(j, k) = std::sqrt(table.step(m + 1 + static_cast<std::size_t>(j))) * rng.normal();
  }
  const Eigen::MatrixXd y =
      table.coefficients().block(static_cast<Index>(m), static_cast<Index>(m), f, f).triangularView<Eigen::Lower>() * z;

  double past = outer.q[0] * outer.e0;
  for (std::size_t i = 1; i <= m; ++i) past += outer.q[i] * outer.e(static_cast<Index>(i - 1));

  Eigen::MatrixXd w(static_cast<Index>(n), cols);
  const auto mi = static_cast<Index>(m);
  for (Index k = 0; k < cols; ++k) {
    const double sign = k < pairs ? 1.0 : -1.0;
    const Index src = k < pairs ? k : k - pairs;
    double F = past;
    for (Index j = 0; j < f; ++j) {
      const auto node = static_cast<std::size_t>(mi + j) + 1;
      const double b = partial_means(mi + j) + sign * y(j, src);
      const double e = outer.q[node] * std::exp(params.drift * table.grid()[node] + params.volatility * b);
      w(mi + j, k) = e;
      F += e;
    }
    for (Index i = 0; i < mi; ++i) w(i, k) = outer.q[static_cast<std::size_t>(i) + 1] * outer.e(i);
    w.col(k) /= F;
  }
  return w;
}

// Mean and standard error of antithetic samples laid out as [first half | partners].
struct PairStats {
  double mean = 0.0;
  double se = 0.0;
};
PairStats pair_stats(const Eigen::Ref<const Eigen::RowVectorXd>& samples) {
  const Index pairs = samples.size() / 2;
  stats::Accumulator acc;
  for (Index k = 0; k < pairs; ++k) acc.add(0.5 * (samples(k) + samples(k + pairs)));
  return {acc.mean(), acc.standard_error()};
}

void validate_nested(const NestedOptions& options) {
  if (options.inner_paths < 50) throw DomainError("inner_paths must be >= 50");
  if (options.inner_paths % 2 != 0) throw DomainError("inner_paths must be even (antithetic pairs)");
  if (options.stride == 0) throw DomainError("stride must be >= 1");
}

ConditionalEstimate conditional_at(const KernelTable& table, const ModelParams& params, const OuterState& outer,
                                   const PartialMeans& means, std::size_t m, const NestedOptions& options,
                                   std::uint64_t outer_id) {
  const std::size_t n = table.cells();
  if (m >= n || params.volatility == 0.0) return {0.0, 0.0, options.inner_paths};
  const Eigen::MatrixXd w =
      inner_weights(table, params, outer, means.values(), m, options.inner_paths, options.seed, outer_id);
  const auto mi = static_cast<Index>(m);
  const auto f = static_cast<Index>(n - m);
  const Eigen::RowVectorXd samples =
      params.volatility * table.coefficients().col(mi).segment(mi, f).transpose() * w.bottomRows(f);
  const auto ps = pair_stats(samples);
  return {ps.mean, ps.se, options.inner_paths};
}

double terminal_coefficient(const KernelTable& table, std::size_t m) { return table.coefficient(table.cells(), m + 1); }

}  // namespace

std::vector<double> dX(const FbmPath& path, const KernelTable& table, const ModelParams& params) {
  params.validate();
  return dX_from_state(outer_state(path, table, params), table, params.volatility);
}

Eigen::MatrixXd d2X(const FbmPath& path, const KernelTable& table, const ModelParams& params) {
  params.validate();
  const auto s = outer_state(path, table, params);
  return d2X_from_state(s, table, params.volatility, dX_from_state(s, table, params.volatility));
}

std::vector<double> dX_upper_bound(const KernelTable& table, double volatility) {
  const std::size_t n = table.cells();
  std::vector<double> out(n + 1, 0.0);
  out[0] = std::numeric_limits<double>::infinity();
  for (std::size_t m = 1; m < n; ++m) out[m] = volatility * table.values()(static_cast<Index>(n - 1), static_cast<Index>(m - 1));
  return out;
}

ConditionalEstimate conditional_dX(const FbmPath& path, const KernelTable& table, const ModelParams& params,
                                   double theta, const NestedOptions& options) {
  params.validate();
  validate_nested(options);
  const auto& dB = require_increments(path, table);
  const std::size_t m = table.node_index(theta);
  const auto outer = outer_state(path, table, params);
  PartialMeans means(table, dB);
  means.advance_to(m);
  return conditional_at(table, params, outer, means, m, options, path.seed.index);
}

std::vector<std::size_t> theta_subgrid(std::size_t cells, std::size_t stride) {
  if (stride == 0) throw DomainError("stride must be >= 1");
  std::vector<std::size_t> nodes;
  for (std::size_t m = 0; m + 1 < cells; m += stride) nodes.push_back(m);
  if (cells > 0) nodes.push_back(cells - 1);
  return nodes;
}

double discrete_aggregate_integral(const KernelTable& table) {
  const std::size_t n = table.cells();
  const auto q = trapezoid_weights(table.grid());
  Eigen::VectorXd qv(static_cast<Index>(n));
  for (std::size_t i = 1; i <= n; ++i) qv(static_cast<Index>(i - 1)) = q[i];
  const Eigen::VectorXd g = table.coefficients().transpose() * qv;
  double total = 0.0;
  for (std::size_t m = 0; m < n; ++m) total += table.step(m + 1) * g(static_cast<Index>(m)) * g(static_cast<Index>(m));
  return total;
}

MalliavinProfile malliavin_profile(const FbmPath& path, const KernelTable& table, const ModelParams& params,
                                   const NestedOptions& options, bool with_d2) {
  params.validate();
  validate_nested(options);
  const auto& dB = require_increments(path, table);
  const std::size_t n = table.cells();
  const double sigma = params.volatility;
  const auto outer = outer_state(path, table, params);

  MalliavinProfile p;
  p.dX = dX_from_state(outer, table, sigma);
  if (with_d2) p.d2X = d2X_from_state(outer, table, sigma, p.dX);
  p.subgrid = theta_subgrid(n, options.stride);
  p.cond_dX.assign(n + 1, 0.0);
  p.cond_se.assign(n + 1, 0.0);

  PartialMeans means(table, dB);
  std::vector<double> ratio(p.subgrid.size(), 0.0);
  std::vector<double> ratio_se(p.subgrid.size(), 0.0);
  for (std::size_t k = 0; k < p.subgrid.size(); ++k) {
    const std::size_t m = p.subgrid[k];
    means.advance_to(m);
    const auto est = conditional_at(table, params, outer, means, m, options, path.seed.index);
    p.cond_dX[m] = est.value;
    p.cond_se[m] = est.standard_error;
    const double scale = sigma * terminal_coefficient(table, m);
    if (scale > 0.0) {
      ratio[k] = est.value / scale;
      ratio_se[k] = est.standard_error / scale;
    }
  }

  // Interpolate between simulated nodes and propagate their standard errors.
  std::vector<double> beta(p.subgrid.size(), 0.0);
  double phi = 0.0;
  std::size_t k = 0;
  for (std::size_t m = 0; m < n; ++m) {
    while (k + 1 < p.subgrid.size() && p.subgrid[k + 1] <= m) ++k;
    const double scale = sigma * terminal_coefficient(table, m);
    const double weight = table.step(m + 1) * p.dX[m];
    if (m == p.subgrid[k]) {
      beta[k] += weight * scale;
    } else {
      const std::size_t lo = p.subgrid[k];
      const std::size_t hi = p.subgrid[k + 1];
      const double lambda = static_cast<double>(m - lo) / static_cast<double>(hi - lo);
      p.cond_dX[m] = ((1.0 - lambda) * ratio[k] + lambda * ratio[k + 1]) * scale;
      beta[k] += weight * scale * (1.0 - lambda);
      beta[k + 1] += weight * scale * lambda;
    }
    phi += weight * p.cond_dX[m];
  }
  double var = 0.0;
  for (std::size_t k = 0; k < beta.size(); ++k) var += beta[k] * beta[k] * ratio_se[k] * ratio_se[k];
  p.phi_X = phi;
  p.phi_se = std::sqrt(var);

  const auto mp = martingale_profile(path, table, params);
  const auto [lo_b, hi_b] = std::minmax_element(path.values.begin(), path.values.end());
  p.min_B = *lo_b;
  p.max_B = *hi_b;
  p.min_N = mp.min_conditional_mean;
  p.max_M = *std::max_element(mp.values.begin(), mp.values.end());
  const double T = params.horizon;
  const double at = std::abs(params.drift) * T;
  p.phi_lower_bound = sigma * sigma / T *
                      std::exp(-3.0 * at + sigma * (p.min_B - p.max_B + p.min_N)) *
                      discrete_aggregate_integral(table) / p.max_M;
  return p;
}

PhiEstimate phi_X(const FbmPath& path, const KernelTable& table, const ModelParams& params,
                  const NestedOptions& options) {
  const auto p = malliavin_profile(path, table, params, options, false);
  return {p.phi_X, p.phi_se, p.phi_lower_bound, params.variance_scale()};
}

double clark_ocone_residual(const FbmPath& path, const KernelTable& table, const ModelParams& params) {
  params.validate();
  const auto& dB = require_increments(path, table);
  const std::size_t n = table.cells();
  const auto grid = table.grid();
  const auto q = trapezoid_weights(grid);
  const double a = params.drift;
  const double s = params.volatility;
  if (s == 0.0) return 0.0;
  std::vector<double> target(n + 1);
  for (std::size_t i = 0; i <= n; ++i) target[i] = std::pow(grid[i], 2.0 * table.hurst());
  std::vector<double> mean(n + 1, 0.0);
  std::vector<double> energy(n + 1, 0.0);
  double residual = functional_F(path, params) - analytic_mean_F_on_grid(params, grid);
  for (std::size_t m = 0; m < n; ++m) {
    double d = 0.0;
    for (std::size_t i = m + 1; i <= n; ++i) {
      const double v = std::max(0.0, target[i] - energy[i]);
      d += q[i] * table.coefficient(i, m + 1) * std::exp(a * grid[i] + s * mean[i] + 0.5 * s * s * v);
    }
    residual -= s * d * dB[m];
    const double dt = table.step(m + 1);
    for (std::size_t i = m + 1; i <= n; ++i) {
      const double c = table.coefficient(i, m + 1);
      mean[i] += c * dB[m];
      energy[i] += c * c * dt;
    }
  }
  return residual;
}

ResidualStatistics clark_ocone_residual(const KernelTable& table, const ModelParams& params, std::uint64_t seed,
                                        std::uint64_t first, std::size_t count) {
  params.validate();
  std::vector<double> r(count);
  parallel_for(count, [&](std::size_t k) {
    const auto path = sample_fbm_volterra(table, {seed, StreamPurpose::increments, first + k, 0});
    r[k] = clark_ocone_residual(path, table, params);
  });
  const auto m = stats::mean_estimate(r);
  const auto v = stats::variance_estimate(r);
  return {count, m.mean, m.standard_error, v.variance, v.standard_error};
}

DphiResult dphi(const FbmPath& path, const KernelTable& table, const ModelParams& params,
                const NestedOptions& options) {
  params.validate();
  validate_nested(options);
  const auto& dB = require_increments(path, table);
  const std::size_t n = table.cells();
  const auto ni = static_cast<Index>(n);
  const double sigma = params.volatility;
  const auto outer = outer_state(path, table, params);
  const auto dx = dX_from_state(outer, table, sigma);
  const Eigen::MatrixXd d2 = d2X_from_state(outer, table, sigma, dx);
  const Eigen::MatrixXd& c = table.coefficients();

  DphiResult out;
  out.dphi.assign(n + 1, 0.0);
  out.dphi_se.assign(n + 1, 0.0);
  std::vector<double> cond(n + 1, 0.0);
  std::vector<double> cond_se(n + 1, 0.0);
  if (sigma == 0.0) return out;

  Eigen::VectorXd dphi_sum = Eigen::VectorXd::Zero(ni);
  Eigen::VectorXd dphi_var = Eigen::VectorXd::Zero(ni);
  PartialMeans means(table, dB);
  for (std::size_t m = 0; m < n; ++m) {
    means.advance_to(m);
    const auto mi = static_cast<Index>(m);
    const Index f = ni - mi;
    const Eigen::MatrixXd w =
        inner_weights(table, params, outer, means.values(), m, options.inner_paths, options.seed, path.seed.index);
    // a(p, k) = sum_i c_{i,p+1} w_ik, so sigma * a is D_p X on inner path k.
    const Eigen::MatrixXd a = c.transpose().triangularView<Eigen::Upper>() * w;
    const Eigen::RowVectorXd dxm = sigma * a.row(mi);
    const auto cs = pair_stats(dxm);
    cond[m] = cs.mean;
    cond_se[m] = cs.se;

    const double dt = table.step(m + 1);
    // y(p, k): contribution of node m to D_p Phi on inner path k.
    Eigen::MatrixXd y = dt * d2.col(mi).head(ni) * dxm;
    if (m > 0) {
      const Eigen::MatrixXd bm =
          c.block(mi, 0, f, mi).transpose() * (c.col(mi).segment(mi, f).asDiagonal() * w.bottomRows(f));
      Eigen::MatrixXd e2 = sigma * sigma * bm;
      for (Index k = 0; k < w.cols(); ++k) e2.col(k) -= sigma * sigma * a(mi, k) * a.col(k).head(mi);
      y.topRows(mi) += dt * dx[m] * e2;
    }
    for (Index p = 0; p < ni; ++p) {
      const auto ps = pair_stats(y.row(p));
      dphi_sum(p) += ps.mean;
      dphi_var(p) += ps.se * ps.se;
    }
  }
  double integral = 0.0;
  double integral_var = 0.0;
  double phi = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const auto pi = static_cast<Index>(p);
    out.dphi[p] = dphi_sum(pi);
    out.dphi_se[p] = std::sqrt(dphi_var(pi));
    const double dt = table.step(p + 1);
    integral += dt * out.dphi[p] * cond[p];
    integral_var += std::pow(dt * cond[p] * out.dphi_se[p], 2) + std::pow(dt * out.dphi[p] * cond_se[p], 2);
    phi += dt * dx[p] * cond[p];
  }
  out.integral = integral;
  out.integral_se = std::sqrt(integral_var);
  out.phi_full = phi;
  return out;
}

namespace {

DphiCheck empty_dphi_check() {
  DphiCheck check;
  check.pointwise = BoundReport("dphi", "0 <= D_s Phi_X <= 4 sigma^3 K(T,s) T^{2H}");
  check.integral = BoundReport("dphi_int", "0 <= int_0^T D_s Phi_X E[D_s X | F_s] ds <= 4 sigma^4 T^{4H}");
  return check;
}

void check_dphi_path(DphiCheck& check, const DphiResult& r, const KernelTable& table, const ModelParams& params) {
  const std::size_t n = table.cells();
  const double s = params.volatility;
  const double scale = params.variance_scale();
  const auto kT = dX_upper_bound(table, 1.0);
  for (std::size_t p = 0; p <= n; ++p) {
    const double t = table.grid()[p];
    check.pointwise.check_lower(t, r.dphi[p], 0.0, r.dphi_se[p]);
    check.pointwise.check_upper(t, r.dphi[p], 4.0 * s * s * s * kT[p] * std::pow(params.horizon, 2.0 * params.hurst),
                                r.dphi_se[p]);
  }
  check.integral.check_lower(0.0, r.integral, 0.0, r.integral_se);
  check.integral.check_upper(0.0, r.integral, 4.0 * scale * scale, r.integral_se);
}

}  // namespace

DphiCheck dphi_bound_check(const FbmPath& path, const KernelTable& table, const ModelParams& params,
                           const NestedOptions& options) {
  auto check = empty_dphi_check();
  const auto r = dphi(path, table, params, options);
  check_dphi_path(check, r, table, params);
  check.paths_requested = check.paths_done = 1;
  check.lnF = {std::log(functional_F(path, params))};
  check.phi = {r.phi_full};
  check.dphi_integral = {r.integral};
  return check;
}

DphiCheck dphi_bound_check(const KernelTable& table, const ModelParams& params, std::uint64_t seed,
                           std::uint64_t first, std::size_t count, const NestedOptions& options,
                           std::optional<std::size_t> budget) {
  params.validate();
  validate_nested(options);
  const std::size_t per_path = table.cells() * options.inner_paths;
  std::size_t done = count;
  if (budget) done = std::min(count, *budget / per_path);
  std::vector<DphiCheck> parts(done);
  parallel_for(done, [&](std::size_t k) {
    const auto path = sample_fbm_volterra(table, {seed, StreamPurpose::increments, first + k, 0});
    parts[k] = dphi_bound_check(path, table, params, options);
  });
  auto check = empty_dphi_check();
  for (const auto& part : parts) {
    check.pointwise.merge(part.pointwise);
    check.integral.merge(part.integral);
    check.lnF.push_back(part.lnF.front());
    check.phi.push_back(part.phi.front());
    check.dphi_integral.push_back(part.dphi_integral.front());
  }
  check.paths_requested = count;
  check.paths_done = done;
  const double coverage = count == 0 ? 1.0 : static_cast<double>(done) / static_cast<double>(count);
  check.pointwise.coverage = check.integral.coverage = coverage;
  return check;
}

namespace {

NestedBatch empty_batch() {
  NestedBatch b;
  b.kld2 = BoundReport("kld2", "0 <= D_theta X <= sigma K(T,theta), also for E[D_theta X | F_theta]");
  b.kld3 = BoundReport("kld3", "0 <= D_r D_theta X <= 2 sigma^2 K(T,theta) K(T,r)");
  b.phi_upper = BoundReport("phi_upper", "0 <= Phi_X <= sigma^2 T^{2H}");
  b.ol0 = BoundReport("ol0",
                      "Phi_X >= sigma^2/T exp(-3|a|T + sigma(min B^H - max B^H + min N)) "
                      "int_0^T (int_theta^T K(s,theta) ds)^2 dtheta / max M");
  return b;
}

}  // namespace

NestedBatch nested_batch(const KernelTable& table, const ModelParams& params, double mean_lnF, std::uint64_t seed,
                         std::uint64_t first, std::size_t count, const NestedOptions& options) {
  params.validate();
  validate_nested(options);
  const std::size_t n = table.cells();
  const auto bound = dX_upper_bound(table, params.volatility);
  const double scale = params.variance_scale();
  constexpr std::size_t kChunk = 16;
  const BlockPartition part{count, kChunk};
  std::vector<NestedBatch> parts(part.blocks());
  NestedBatch out = empty_batch();
  out.X.assign(count, 0.0);
  out.phi.assign(count, 0.0);
  out.phi_se.assign(count, 0.0);
  parallel_for(part.blocks(), [&](std::size_t b) {
    auto& local = parts[b];
    local = empty_batch();
    local.kld3.detail_limit = 0;
    local.mean_dX.assign(n + 1, 0.0);
    local.mean_cond_dX.assign(n + 1, 0.0);
    for (std::size_t k = part.begin(b); k < part.end(b); ++k) {
      const auto path = sample_fbm_volterra(table, {seed, StreamPurpose::increments, first + k, 0});
      const auto p = malliavin_profile(path, table, params, options, true);
      out.X[k] = std::log(functional_F(path, params)) - mean_lnF;
      out.phi[k] = p.phi_X;
      out.phi_se[k] = p.phi_se;
      for (std::size_t m = 0; m <= n; ++m) {
        local.mean_dX[m] += p.dX[m] / static_cast<double>(count);
        local.mean_cond_dX[m] += p.cond_dX[m] / static_cast<double>(count);
      }
      for (std::size_t m = 0; m <= n; ++m) {
        const double t = table.grid()[m];
        local.kld2.check_lower(t, p.dX[m], 0.0);
        local.kld2.check_upper(t, p.dX[m], bound[m]);
      }
      for (const std::size_t m : p.subgrid) {
        const double t = table.grid()[m];
        local.kld2.check_lower(t, p.cond_dX[m], 0.0, p.cond_se[m]);
        local.kld2.check_upper(t, p.cond_dX[m], bound[m], p.cond_se[m]);
      }
      const auto& d2 = *p.d2X;
      for (std::size_t r = 0; r <= n; ++r) {
        for (std::size_t m = 0; m <= r; ++m) {
          const double v = d2(static_cast<Index>(r), static_cast<Index>(m));
          const double ub = 2.0 * bound[r] * bound[m];
          local.kld3.check_lower(table.grid()[r], v, 0.0);
          local.kld3.check_upper(table.grid()[r], v, std::isnan(ub) ? std::numeric_limits<double>::infinity() : ub);
        }
      }
      local.phi_upper.check_lower(static_cast<double>(first + k), p.phi_X, 0.0, p.phi_se);
      local.phi_upper.check_upper(static_cast<double>(first + k), p.phi_X, scale, p.phi_se);
      local.ol0.check_lower(static_cast<double>(first + k), p.phi_X, p.phi_lower_bound, p.phi_se);
    }
  });
  out.mean_dX.assign(n + 1, 0.0);
  out.mean_cond_dX.assign(n + 1, 0.0);
  for (const auto& local : parts) {
    for (std::size_t m = 0; m <= n; ++m) {
      out.mean_dX[m] += local.mean_dX[m];
      out.mean_cond_dX[m] += local.mean_cond_dX[m];
    }
    out.kld2.merge(local.kld2);
    out.kld3.merge(local.kld3);
    out.phi_upper.merge(local.phi_upper);
    out.ol0.merge(local.ol0);
  }
  return out;
}

}  // namespace efbm
