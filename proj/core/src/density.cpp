#include "efbm/density.hpp"

#include "efbm/errors.hpp"
#include "efbm/parallel.hpp"
#include "efbm/rng.hpp"
#include "efbm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>

namespace efbm {

XBatch summarize_x_batch(std::vector<double> F, std::vector<double> X, const CenteringConstant& centering) {
  if (F.size() != X.size()) throw DimensionMismatch("summarize_x_batch: F and X sizes differ");
  XBatch b;
  b.centering = centering;
  b.F = std::move(F);
  b.X = std::move(X);
  const auto n = static_cast<double>(b.X.size());
  const auto vx = stats::variance_estimate(b.X);
  const auto vf = stats::variance_estimate(b.F);
  b.mean_X = vx.mean;
  b.mean_X_se = n > 1 ? std::sqrt(vx.variance / n) : 0.0;
  b.var_X = vx.variance;
  b.var_X_se = vx.standard_error;
  b.mean_F = vf.mean;
  b.mean_F_se = n > 1 ? std::sqrt(vf.variance / n) : 0.0;
  b.var_F = vf.variance;
  b.var_F_se = vf.standard_error;
  return b;
}

XBatch sample_X_batch(const KernelTable& table, const ModelParams& params, const CenteringConstant& centering,
                      std::size_t n_paths, std::uint64_t seed) {
  const auto samples = sample_functionals(table, params, centering, seed, 0, n_paths);
  std::vector<double> F;
  std::vector<double> X;
  F.reserve(n_paths);
  X.reserve(n_paths);
  for (const auto& s : samples) {
    F.push_back(s.F);
    X.push_back(s.X);
  }
  return summarize_x_batch(std::move(F), std::move(X), centering);
}

namespace {

double trapezoid(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  return i + 1 < sorted.size() ? sorted[i] * (1 - frac) + sorted[i + 1] * frac : sorted.back();
}

struct BinnedKde {
  double lo = 0.0;
  double delta = 0.0;
  std::size_t points = 0;
  double h = 0.0;
  std::vector<double> kernel;       // phi(k delta / h), k = 0..half
  std::vector<double> kernel_diff;  // phi'(k delta / h)

  BinnedKde(double lo_, double hi_, std::size_t points_, double h_) : lo(lo_), points(points_), h(h_) {
    delta = (hi_ - lo_) / static_cast<double>(points - 1);
    const auto half = std::min<std::size_t>(points, static_cast<std::size_t>(std::ceil(7.0 * h / delta)) + 1);
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t k = 0; k < half; ++k) {
      const double u = static_cast<double>(k) * delta / h;
      kernel.push_back(norm * std::exp(-0.5 * u * u));
      kernel_diff.push_back(-u * kernel.back());
    }
  }

  void bin(double x, std::vector<double>& counts) const {
    const double pos = (x - lo) / delta;
    auto i = static_cast<std::size_t>(std::max(0.0, std::floor(pos)));
    if (i >= points - 1) i = points - 2;
    const double frac = std::clamp(pos - static_cast<double>(i), 0.0, 1.0);
    counts[i] += 1.0 - frac;
    counts[i + 1] += frac;
  }

  // density and derivative at the grid points from bin counts of n samples.
  void smooth(const std::vector<double>& counts, double n, std::vector<double>& dens,
              std::vector<double>& deriv) const {
    dens.assign(points, 0.0);
    deriv.assign(points, 0.0);
    const auto half = kernel.size();
    for (std::size_t k = 0; k < points; ++k) {
      const double c = counts[k];
      if (c == 0.0) continue;
      dens[k] += c * kernel[0];
      for (std::size_t d = 1; d < half; ++d) {
        if (k + d < points) {
          dens[k + d] += c * kernel[d];
          deriv[k + d] += c * kernel_diff[d];
        }
        if (k >= d) {
          dens[k - d] += c * kernel[d];
          deriv[k - d] -= c * kernel_diff[d];
        }
      }
    }
    for (std::size_t j = 0; j < points; ++j) {
      dens[j] /= n * h;
      deriv[j] /= n * h * h;
    }
  }
};

}  // namespace

double DensityEstimate::integral() const { return trapezoid(grid, density); }
double DensityEstimate::f_integral() const { return trapezoid(f_grid, f_density); }

double silverman_bandwidth(std::span<const double> samples) {
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double sd = std::sqrt(stats::variance_estimate(samples).variance);
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(static_cast<double>(samples.size()), -0.2);
}

DensityEstimate kde_log_domain(std::span<const double> x, double centering, const KdeOptions& options) {
  if (x.size() < kMinKdeSamples) {
    throw DomainError("kde_log_domain: needs at least " + std::to_string(kMinKdeSamples) + " samples");
  }
  if (options.grid_points < 16) throw DomainError("kde_log_domain: grid_points must be >= 16");
  DensityEstimate d;
  d.centering = centering;
  d.n_samples = x.size();
  d.min_tail_samples = options.min_tail_samples;
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  if (!(*mx > *mn)) {
    d.point_mass = true;
    d.resolved_lo = d.resolved_hi = *mn;
    return d;
  }
  d.bandwidth = options.bandwidth ? *options.bandwidth : silverman_bandwidth(x);
  if (!(d.bandwidth > 0.0)) throw DomainError("kde_log_domain: bandwidth must be positive");
  const double h = d.bandwidth;
  const BinnedKde kde(*mn - 3.0 * h, *mx + 3.0 * h, options.grid_points, h);
  const auto n = static_cast<double>(x.size());

  std::vector<double> counts(kde.points, 0.0);
  for (double v : x) kde.bin(v, counts);
  std::vector<double> deriv;
  kde.smooth(counts, n, d.density, deriv);
  d.grid.resize(kde.points);
  for (std::size_t j = 0; j < kde.points; ++j) d.grid[j] = kde.lo + static_cast<double>(j) * kde.delta;
  d.log_slope.resize(kde.points);
  for (std::size_t j = 0; j < kde.points; ++j) {
    d.log_slope[j] = d.density[j] > 0.0 ? -deriv[j] / d.density[j] : std::numeric_limits<double>::quiet_NaN();
  }

  // Bootstrap over resampled indices.
  d.bootstrap = options.bootstrap;
  std::vector<std::vector<double>> boot_dens(options.bootstrap);
  std::vector<std::vector<double>> boot_slope(options.bootstrap);
  parallel_for(options.bootstrap, [&](std::size_t b) {
    RandomStream rng(options.seed, StreamPurpose::bootstrap, b);
    std::vector<double> c(kde.points, 0.0);
    for (std::size_t k = 0; k < x.size(); ++k) {
      auto idx = static_cast<std::size_t>(rng.uniform() * n);
      if (idx >= x.size()) idx = x.size() - 1;
      kde.bin(x[idx], c);
    }
    std::vector<double> dv;
    kde.smooth(c, n, boot_dens[b], dv);
    boot_slope[b].resize(kde.points);
    for (std::size_t j = 0; j < kde.points; ++j) {
      boot_slope[b][j] = boot_dens[b][j] > 0.0 ? -dv[j] / boot_dens[b][j] : 0.0;
    }
  });
  d.se.assign(kde.points, 0.0);
  d.log_slope_se.assign(kde.points, 0.0);
  for (std::size_t j = 0; j < kde.points; ++j) {
    stats::Accumulator a;
    stats::Accumulator s;
    for (std::size_t b = 0; b < options.bootstrap; ++b) {
      a.add(boot_dens[b][j]);
      s.add(boot_slope[b][j]);
    }
    d.se[j] = std::sqrt(a.variance());
    d.log_slope_se[j] = std::sqrt(s.variance());
  }

  d.f_grid.resize(kde.points);
  d.f_density.resize(kde.points);
  d.f_se.resize(kde.points);
  for (std::size_t j = 0; j < kde.points; ++j) {
    d.f_grid[j] = std::exp(d.grid[j] + centering);
    d.f_density[j] = d.density[j] / d.f_grid[j];
    d.f_se[j] = d.se[j] / d.f_grid[j];
  }

  const std::size_t k = std::min(options.min_tail_samples, x.size()) - 1;
  std::vector<double> tmp(x.begin(), x.end());
  std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(k), tmp.end());
  d.resolved_lo = tmp[k];
  std::nth_element(tmp.begin(), tmp.end() - 1 - static_cast<std::ptrdiff_t>(k), tmp.end());
  d.resolved_hi = tmp[tmp.size() - 1 - k];
  return d;
}

BoundReport verify_gaussian_tail(std::span<const double> x, const ModelParams& params,
                                 std::span<const double> points) {
  params.validate();
  const double s2 = params.variance_scale();
  BoundReport r("jkvm1b", "P(X <= x) <= exp(-x^2 / (2 sigma^2 T^{2H})), x <= 0");
  for (double p : points) {
    if (p > 0.0) throw DomainError("verify_gaussian_tail: evaluation points must be <= 0");
    const auto cdf = stats::empirical_cdf(x, p);
    const double bound = s2 > 0.0 ? std::exp(-p * p / (2.0 * s2)) : (p < 0.0 ? 0.0 : 1.0);
    r.check_upper(p, cdf.mean, bound, cdf.standard_error);
  }
  return r;
}

namespace {

// Applies the non-explosion rule to a profile ordered from the inner edge
// (distance 0) to the outer edge of the resolved tail.
void judge_profile(BoundReport& report, EnvelopeProfile& prof, const std::vector<double>& distance) {
  if (prof.z.size() < 6) {
    report.mark_inconclusive(prof.z.size() + 1);
    report.notes.push_back("fewer than 6 grid points in the resolved " + prof.tail + " tail");
    return;
  }
  const double extent = *std::max_element(distance.begin(), distance.end());
  prof.inner_max = 0.0;
  prof.outer_max = 0.0;
  std::size_t inner = 0;
  for (std::size_t i = 0; i < prof.z.size(); ++i) {
    if (distance[i] <= extent / 3.0) {
      prof.inner_max = std::max(prof.inner_max, prof.implied[i]);
      ++inner;
    }
  }
  for (std::size_t i = 0; i < prof.z.size(); ++i) {
    if (distance[i] >= 2.0 * extent / 3.0) {
      prof.outer_max = std::max(prof.outer_max, prof.implied[i]);
      report.check_upper(prof.z[i], prof.implied[i], 1.5 * prof.inner_max, prof.se[i]);
    }
  }
  prof.conclusive = inner > 0 && report.points_checked > 0;
  report.implied_constant = *std::max_element(prof.implied.begin(), prof.implied.end());
  report.extra = {{"inner_max", prof.inner_max}, {"outer_max", prof.outer_max}, {"extent", extent}};
}

}  // namespace

EnvelopeCheck verify_envelopes(const DensityEstimate& density, const ModelParams& params, const XBatch& batch) {
  params.validate();
  if (density.point_mass || params.volatility == 0.0) {
    throw UnsupportedOperation("verify_envelopes: the law of X is a point mass");
  }
  const double s2 = params.variance_scale();
  EnvelopeCheck out;
  out.left = BoundReport("kl1", "rho_F(x) <= c/x exp(-(ln x - E ln F)^2 / (8 sigma^2 T^{2H})), 0 < x <= e^{E ln F}");
  out.right = BoundReport("kl2", "rho_F(x) <= c/x exp(-(ln x - E ln F)^2 / (2 sigma^2 T^{2H})), x > e^{E ln F}");
  out.remark = BoundReport("remark", "rho_F(x) <= c exp(-(x - E F)^2 / (8 Var F)), x <= E F");
  out.slope = BoundReport("kl2_slope", "-d/dz ln rho_X(z) >= z / (sigma^2 T^{2H}), z > 0");
  out.left_profile.tail = "left";
  out.right_profile.tail = "right";
  out.remark_profile.tail = "remark";

  std::vector<double> left_dist;
  std::vector<double> right_dist;
  for (std::size_t j = 0; j < density.grid.size(); ++j) {
    const double z = density.grid[j];
    if (z < density.resolved_lo || z > density.resolved_hi) continue;
    if (z <= 0.0) {
      const double g = std::exp(z * z / (8.0 * s2));
      out.left_profile.z.push_back(z);
      out.left_profile.implied.push_back(density.density[j] * g);
      out.left_profile.se.push_back(density.se[j] * g);
      left_dist.push_back(-z);
    } else {
      const double g = std::exp(z * z / (2.0 * s2));
      out.right_profile.z.push_back(z);
      out.right_profile.implied.push_back(density.density[j] * g);
      out.right_profile.se.push_back(density.se[j] * g);
      right_dist.push_back(z);
      out.slope.check_lower(z, density.log_slope[j], z / s2, density.log_slope_se[j]);
    }
  }
  judge_profile(out.left, out.left_profile, left_dist);
  judge_profile(out.right, out.right_profile, right_dist);

  const double mean_f = batch.mean_F;
  const double var_f = batch.var_F;
  std::vector<double> remark_dist;
  for (std::size_t j = 0; j < density.f_grid.size(); ++j) {
    const double x = density.f_grid[j];
    const double z = density.grid[j];
    if (z < density.resolved_lo || x > mean_f) continue;
    const double g = std::exp((x - mean_f) * (x - mean_f) / (8.0 * var_f));
    out.remark_profile.z.push_back(x);
    out.remark_profile.implied.push_back(density.f_density[j] * g);
    out.remark_profile.se.push_back(density.f_se[j] * g);
    remark_dist.push_back(mean_f - x);
  }
  judge_profile(out.remark, out.remark_profile, remark_dist);
  if (out.slope.points_checked == 0) out.slope.mark_inconclusive();
  return out;
}

WProfile estimate_w_X(std::span<const double> x, std::span<const double> phi, const ModelParams& params,
                      double bin_width, std::size_t min_bin_count, std::span<const double> h_integrand) {
  params.validate();
  if (x.size() != phi.size()) throw DimensionMismatch("estimate_w_X: X and Phi_X sizes differ");
  if (!h_integrand.empty() && h_integrand.size() != x.size()) {
    throw DimensionMismatch("estimate_w_X: h integrand size differs");
  }
  if (!(bin_width > 0.0)) throw DomainError("estimate_w_X: bin width must be positive");
  const double s2 = params.variance_scale();
  struct Bin {
    stats::Accumulator z;
    stats::Accumulator w;
    stats::Accumulator h;
  };
  std::map<long, Bin> bins;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(phi[i] > 0.0)) continue;
    auto& b = bins[static_cast<long>(std::floor(x[i] / bin_width))];
    b.z.add(x[i]);
    b.w.add(x[i] / phi[i]);
    if (!h_integrand.empty()) b.h.add(h_integrand[i] / (phi[i] * phi[i]));
  }
  WProfile out;
  out.lower = BoundReport("w_X", "E[X / Phi_X | X = z] >= z / (sigma^2 T^{2H}), z > 0");
  out.reconstruction = BoundReport("w_X_reconstruction", "exp(-int_0^z w_X) <= exp(-z^2 / (2 sigma^2 T^{2H})), z > 0");
  if (bins.empty()) return out;
  const long first = bins.begin()->first;
  const long last = bins.rbegin()->first;
  long lowest_resolved = last + 1;
  long highest_resolved = first - 1;
  for (const auto& [k, b] : bins) {
    if (b.z.count() >= min_bin_count) {
      lowest_resolved = std::min(lowest_resolved, k);
      highest_resolved = std::max(highest_resolved, k);
    }
  }
  double integral = 0.0;
  double integral_var = 0.0;
  bool contiguous = true;
  for (long k = first; k <= last; ++k) {
    const auto it = bins.find(k);
    const bool resolved = it != bins.end() && it->second.z.count() >= min_bin_count;
    if (!resolved && k > lowest_resolved && k < highest_resolved) ++out.gaps;
    if (k >= 0 && !resolved) contiguous = false;
    if (it == bins.end()) continue;
    const auto& b = it->second;
    out.z.push_back(b.z.mean());
    out.lo.push_back(static_cast<double>(k) * bin_width);
    out.hi.push_back(static_cast<double>(k + 1) * bin_width);
    out.count.push_back(b.z.count());
    out.w.push_back(b.w.mean());
    out.se.push_back(b.w.standard_error());
    out.resolved.push_back(resolved);
    if (!h_integrand.empty()) out.h.push_back(b.h.mean());
    if (!resolved) continue;
    const double z = b.z.mean();
    const double w = b.w.mean();
    const double se = b.w.standard_error();
    if ((w > 0) != (z > 0) && std::abs(w) > 3.0 * se && std::abs(z) > 0.0) ++out.sign_mismatches;
    if (k >= 0) {
      out.lower.check_lower(z, w, z / s2, se);
      if (contiguous) {
        integral += w * bin_width;
        integral_var += bin_width * bin_width * se * se;
        const double edge = static_cast<double>(k + 1) * bin_width;
        const double value = std::exp(-integral);
        out.reconstruction.check_upper(edge, value, std::exp(-edge * edge / (2.0 * s2)),
                                       value * std::sqrt(integral_var));
      }
    }
  }
  if (out.lower.points_checked == 0) out.lower.mark_inconclusive();
  if (out.reconstruction.points_checked == 0) out.reconstruction.mark_inconclusive();
  out.lower.extra = {{"gaps", out.gaps}, {"sign_mismatches", out.sign_mismatches}};
  return out;
}

BoundReport verify_mgf(std::span<const double> x, const ModelParams& params, std::span<const double> lambdas) {
  params.validate();
  const double s2 = params.variance_scale();
  BoundReport r("mgf", "E[exp(-lambda X)] <= exp(lambda^2 sigma^2 T^{2H} / 2)");
  std::vector<double> v(x.size());
  for (double lambda : lambdas) {
    for (std::size_t i = 0; i < x.size(); ++i) v[i] = std::exp(-lambda * x[i]);
    const auto m = stats::mean_estimate(v);
    r.check_upper(lambda, m.mean, std::exp(0.5 * lambda * lambda * s2), m.standard_error);
  }
  return r;
}

nlohmann::json to_json(const DensityEstimate& d) {
  return {{"domain", d.domain},
          {"point_mass", d.point_mass},
          {"bandwidth", d.bandwidth},
          {"centering", d.centering},
          {"n_samples", d.n_samples},
          {"bootstrap", d.bootstrap},
          {"resolved_range", {d.resolved_lo, d.resolved_hi}},
          {"integral", d.point_mass ? 1.0 : d.integral()},
          {"f_integral", d.point_mass ? 1.0 : d.f_integral()},
          {"grid", d.grid},
          {"density", d.density},
          {"se", d.se}};
}

nlohmann::json to_json(const EnvelopeProfile& p) {
  return {{"tail", p.tail},     {"z", p.z},
          {"implied", p.implied}, {"se", p.se},
          {"inner_max", p.inner_max}, {"outer_max", p.outer_max},
          {"conclusive", p.conclusive}};
}

nlohmann::json to_json(const WProfile& w) {
  std::vector<int> resolved(w.resolved.begin(), w.resolved.end());
  nlohmann::json j{{"z", w.z},         {"bin_lo", w.lo},   {"bin_hi", w.hi}, {"count", w.count},
                   {"w", w.w},         {"se", w.se},       {"resolved", resolved},
                   {"gaps", w.gaps},   {"sign_mismatches", w.sign_mismatches}};
  if (!w.h.empty()) j["h_low_precision"] = w.h;
  return j;
}

}  // namespace efbm
