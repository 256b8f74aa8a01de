#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace efbm::stats {

/// Welford accumulator.
class Accumulator {
 public:
  void add(double x) {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }
  std::size_t count() const { return count_; }
  double mean() const { return mean_; }
  /// Unbiased sample variance (0 for fewer than two observations).
  double variance() const { return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0; }
  double standard_error() const {
    return count_ > 1 ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0;
  }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct MeanEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t count = 0;
};

MeanEstimate mean_estimate(std::span<const double> xs);

/// Sample variance with the standard error of that variance estimate, from the
/// fourth central moment: SE^2 = (m4 - (n-3)/(n-1) s^4) / n.
struct VarianceEstimate {
  double variance = 0.0;
  double standard_error = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
};
VarianceEstimate variance_estimate(std::span<const double> xs);

/// Sample covariance of paired observations with a delta-method standard error
/// (sample standard deviation of the centered products over sqrt(n)).
struct CovarianceEstimate {
  double covariance = 0.0;
  double standard_error = 0.0;
};
CovarianceEstimate covariance_estimate(std::span<const double> xs, std::span<const double> ys);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_x - F_y|. Inputs are copied and sorted.
double ks_two_sample(std::span<const double> xs, std::span<const double> ys);

/// Asymptotic two-sample KS critical value c(level) * sqrt((n+m)/(n m)),
/// with c(level) = sqrt(-ln(level/2)/2).
double ks_critical_value(std::size_t n, std::size_t m, double level);

/// Empirical P(X <= x) with its binomial standard error.
MeanEstimate empirical_cdf(std::span<const double> xs, double x);

}  // namespace efbm::stats
