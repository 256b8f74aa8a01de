#include "efbm/kernel.hpp"

#include "efbm/errors.hpp"
#include "efbm/quadrature.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace efbm {
namespace {

constexpr int kChebyshevDegree = 24;
constexpr double kShapeLo = 0.5;
constexpr double kShapeHi = 2.0;

void require_hurst(double hurst) {
  if (!(hurst > 0.5 && hurst < 1.0)) {
    throw DomainError("Hurst index must lie in (1/2, 1), got " + std::to_string(hurst));
  }
}

}  // namespace

HurstParams::HurstParams(double hurst, double horizon) : hurst_(hurst), horizon_(horizon) {
  require_hurst(hurst);
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw DomainError("horizon T must be positive, got " + std::to_string(horizon));
  }
}

double covariance(double hurst, double t, double s) {
  if (t < 0.0 || s < 0.0) throw DomainError("covariance: times must be non-negative");
  const double h2 = 2.0 * hurst;
  return 0.5 * (std::pow(t, h2) + std::pow(s, h2) - std::pow(std::abs(t - s), h2));
}

double closed_form_ch(double hurst) {
  require_hurst(hurst);
  return std::sqrt(hurst * (2.0 * hurst - 1.0) / boost::math::beta(2.0 - 2.0 * hurst, hurst - 0.5));
}

double calibrate_ch(double hurst, int quad_points) {
  require_hurst(hurst);
  if (quad_points < 64) throw DomainError("calibrate_ch: quad_points must be >= 64");
  const VolterraKernel unit(hurst, 1.0);
  auto squared = [&](double s) {
    const double k = unit(1.0, s);
    return k * k;
  };
  const auto points = static_cast<std::size_t>(quad_points) | 1u;
  const double coarse = quad::tanh_sinh_fixed(squared, 0.0, 1.0, points);
  const double fine = quad::tanh_sinh_fixed(squared, 0.0, 1.0, 2 * points - 1);
  const double residual = std::abs(coarse - fine) / fine;
  if (!(residual <= 1e-9)) {
    throw CalibrationError("calibrate_ch: quadrature not converged for H=" + std::to_string(hurst) +
                               ", residual " + std::to_string(residual),
                           residual);
  }
  return 1.0 / std::sqrt(fine);
}

VolterraKernel::VolterraKernel(double hurst) : VolterraKernel(hurst, 1.0) {
  c_h_ = calibrate_ch(hurst);
}

VolterraKernel::VolterraKernel(double hurst, double c_h)
    : hurst_(hurst), alpha_(hurst - 0.5), power_(1.0 / (hurst - 0.5)), c_h_(c_h) {
  require_hurst(hurst);
  if (!(c_h > 0.0)) throw DomainError("c_H must be positive");

  // Panel width below the distance sin(pi alpha) from the real axis to the
  // nearest singularity of the integrand at exp(+-i pi alpha).
  const double width_target = std::min(0.25, std::sin(std::numbers::pi * alpha_));
  const auto n_panels = static_cast<std::size_t>(std::ceil((kShapeHi - kShapeLo) / width_target));
  const double width = (kShapeHi - kShapeLo) / static_cast<double>(n_panels);
  const auto gl = quad::gauss_legendre_rule(20);
  auto f = [this](double w) { return shape_integrand(w); };

  j_lo_ = shape_small(kShapeLo);
  double j_start = j_lo_;
  panels_.reserve(n_panels);
  for (std::size_t p = 0; p < n_panels; ++p) {
    Panel panel;
    panel.lo = kShapeLo + width * static_cast<double>(p);
    panel.hi = p + 1 == n_panels ? kShapeHi : panel.lo + width;
    const double mid = 0.5 * (panel.lo + panel.hi);
    const double half = 0.5 * (panel.hi - panel.lo);
    std::vector<double> values(kChebyshevDegree);
    for (int k = 0; k < kChebyshevDegree; ++k) {
      const double x = std::cos(std::numbers::pi * (k + 0.5) / kChebyshevDegree);
      const double w = mid + half * x;
      values[k] = j_start + quad::gauss_legendre(gl, f, panel.lo, w);
    }
    panel.coeffs.assign(kChebyshevDegree, 0.0);
    for (int j = 0; j < kChebyshevDegree; ++j) {
      double sum = 0.0;
      for (int k = 0; k < kChebyshevDegree; ++k) {
        sum += values[k] * std::cos(std::numbers::pi * j * (k + 0.5) / kChebyshevDegree);
      }
      panel.coeffs[j] = 2.0 * sum / kChebyshevDegree;
    }
    panel.coeffs[0] *= 0.5;
    j_start += quad::gauss_legendre(gl, f, panel.lo, panel.hi);
    panels_.push_back(std::move(panel));
  }
  j_hi_ = j_start;
}

double VolterraKernel::shape_integrand(double w) const {
  return std::pow(1.0 + std::pow(w, power_), alpha_);
}

// sum_k binom(alpha, k) W^{kp+1} / (kp+1), valid for W < 1.
double VolterraKernel::shape_small(double w) const {
  const double x = std::pow(w, power_);
  double coeff = 1.0;
  double xk = 1.0;
  double sum = 0.0;
  for (int k = 0; k < 400; ++k) {
    if (k > 0) {
      coeff *= (alpha_ - (k - 1)) / k;
      xk *= x;
    }
    const double term = coeff * xk / (k * power_ + 1.0);
    sum += term;
    if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
  }
  return w * sum;
}

// J(2) + (W^2 - 4)/2 + sum_{k>=1} binom(alpha, k) (2^{2-kp} - W^{2-kp}) / (kp - 2), valid for W > 1.
double VolterraKernel::shape_large(double w) const {
  const double y2 = std::pow(kShapeHi, -power_);
  const double yw = std::pow(w, -power_);
  const double w2 = w * w;
  double coeff = 1.0;
  double p2 = 1.0;
  double pw = 1.0;
  double sum = 0.0;
  for (int k = 1; k < 400; ++k) {
    coeff *= (alpha_ - (k - 1)) / k;
    p2 *= y2;
    pw *= yw;
    sum += coeff * (4.0 * p2 - w2 * pw) / (k * power_ - 2.0);
    if (std::abs(coeff) * 4.0 * p2 <= 1e-18) break;
  }
  return j_hi_ + 0.5 * (w2 - 4.0) + sum;
}

double VolterraKernel::shape_integral(double w) const {
  if (w <= 0.0) return 0.0;
  if (w <= kShapeLo) return shape_small(w);
  if (w >= kShapeHi) return shape_large(w);
  const double width = panels_.front().hi - panels_.front().lo;
  auto index = static_cast<std::size_t>((w - kShapeLo) / width);
  if (index >= panels_.size()) index = panels_.size() - 1;
  const Panel& panel = panels_[index];
  const double y = (2.0 * w - panel.lo - panel.hi) / (panel.hi - panel.lo);
  double b1 = 0.0;
  double b2 = 0.0;
  for (int j = kChebyshevDegree - 1; j >= 1; --j) {
    const double b0 = 2.0 * y * b1 - b2 + panel.coeffs[j];
    b2 = b1;
    b1 = b0;
  }
  return y * b1 - b2 + panel.coeffs[0];
}

double VolterraKernel::operator()(double t, double s) const {
  if (!(s > 0.0)) throw DomainError("K(t,s) requires s > 0");
  if (s > t) throw DomainError("K(t,s) requires s <= t");
  if (s == t) return 0.0;
  const double w = std::pow((t - s) / s, alpha_);
  return c_h_ * std::pow(s, alpha_) / alpha_ * shape_integral(w);
}

double VolterraKernel::time_integral(double theta, double horizon) const {
  if (theta < 0.0 || theta > horizon) throw DomainError("time_integral: theta outside [0, T]");
  if (theta == 0.0) return std::numeric_limits<double>::infinity();
  if (theta == horizon) return 0.0;
  auto f = [&](double s) { return (*this)(s, theta); };
  return quad::tanh_sinh(f, theta, horizon, 1e-13).value;
}

double VolterraKernel::energy(double t) const {
  if (!(t > 0.0)) throw DomainError("energy: t must be positive");
  auto f = [&](double s) {
    const double k = (*this)(t, s);
    return k * k;
  };
  return quad::tanh_sinh(f, 0.0, t, 1e-13).value;
}

double kernel_eval(double hurst, double c_h, double t, double s) {
  return VolterraKernel(hurst, c_h)(t, s);
}

double aggregate_time_integral_energy(const VolterraKernel& kernel, double horizon, double rel_tol) {
  auto g2 = [&](double theta) {
    auto f = [&](double s) { return kernel(s, theta); };
    const double g = quad::tanh_sinh(f, theta, horizon, rel_tol * 0.1).value;
    return g * g;
  };
  return quad::tanh_sinh(g2, 0.0, horizon, rel_tol).value;
}

}  // namespace efbm
