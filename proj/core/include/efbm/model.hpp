#pragma once

#include "efbm/errors.hpp"
#include "efbm/kernel.hpp"

#include <cmath>

namespace efbm {

/// Parameters of F = int_0^T exp(a s + sigma B^H_s) ds.
/// sigma = 0 is accepted as the degenerate deterministic model.
struct ModelParams {
  double drift = 0.0;       // a, 1/time
  double volatility = 1.0;  // sigma
  double hurst = 0.7;
  double horizon = 1.0;  // T

  void validate() const {
    HurstParams{hurst, horizon};
    if (!std::isfinite(drift)) throw DomainError("drift must be finite");
    if (!(volatility >= 0.0) || !std::isfinite(volatility)) throw DomainError("volatility must be >= 0");
  }
  /// sigma^2 T^{2H}, the variance scale of every bound.
  double variance_scale() const { return volatility * volatility * std::pow(horizon, 2.0 * hurst); }
};

}  // namespace efbm
