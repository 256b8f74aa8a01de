#pragma once

#include <stdexcept>
#include <string>

namespace efbm {

/// Argument outside the mathematical domain of an operation (e.g. K(t,s) with s <= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The normalizing-constant quadrature did not converge; carries the achieved residual.
class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Requested quantity needs data the object does not carry (e.g. conditioning a
/// Cholesky-sampled path, which has no driving increments).
class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Allocation or work budget exceeded.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace efbm
