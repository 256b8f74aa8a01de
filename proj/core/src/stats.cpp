#include "efbm/stats.hpp"

#include "efbm/errors.hpp"

#include <algorithm>
#include <vector>

namespace efbm::stats {

MeanEstimate mean_estimate(std::span<const double> xs) {
  Accumulator acc;
  for (double x : xs) acc.add(x);
  return {acc.mean(), acc.standard_error(), acc.count()};
}

VarianceEstimate variance_estimate(std::span<const double> xs) {
  VarianceEstimate r;
  r.count = xs.size();
  if (xs.size() < 4) {
    Accumulator acc;
    for (double x : xs) acc.add(x);
    r.mean = acc.mean();
    r.variance = acc.variance();
    return r;
  }
  Accumulator acc;
  for (double x : xs) acc.add(x);
  r.mean = acc.mean();
  double m2 = 0.0;
  double m4 = 0.0;
  for (double x : xs) {
    const double d2 = (x - r.mean) * (x - r.mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  const auto n = static_cast<double>(xs.size());
  m2 /= n;
  m4 /= n;
  r.variance = acc.variance();
  const double s4 = r.variance * r.variance;
  r.standard_error = std::sqrt(std::max(0.0, (m4 - (n - 3.0) / (n - 1.0) * s4) / n));
  return r;
}

CovarianceEstimate covariance_estimate(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DimensionMismatch("covariance_estimate: sample sizes differ");
  const std::size_t n = xs.size();
  if (n < 2) return {};
  const MeanEstimate mx = mean_estimate(xs);
  const MeanEstimate my = mean_estimate(ys);
  Accumulator prod;
  for (std::size_t i = 0; i < n; ++i) prod.add((xs[i] - mx.mean) * (ys[i] - my.mean));
  const auto dn = static_cast<double>(n);
  return {prod.mean() * dn / (dn - 1.0), prod.standard_error()};
}

double ks_two_sample(std::span<const double> xs, std::span<const double> ys) {
  std::vector<double> a(xs.begin(), xs.end());
  std::vector<double> b(ys.begin(), ys.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical_value(std::size_t n, std::size_t m, double level) {
  const double c = std::sqrt(-0.5 * std::log(0.5 * level));
  const auto dn = static_cast<double>(n);
  const auto dm = static_cast<double>(m);
  return c * std::sqrt((dn + dm) / (dn * dm));
}

MeanEstimate empirical_cdf(std::span<const double> xs, double x) {
  const auto hits = static_cast<double>(std::count_if(xs.begin(), xs.end(), [x](double v) { return v <= x; }));
  const auto n = static_cast<double>(xs.size());
  if (xs.empty()) return {};
  const double p = hits / n;
  return {p, std::sqrt(p * (1.0 - p) / n), xs.size()};
}

}  // namespace efbm::stats
