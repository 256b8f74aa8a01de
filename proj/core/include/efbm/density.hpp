#pragma once

#include "efbm/bound_report.hpp"
#include "efbm/functional.hpp"
#include "efbm/kernel_table.hpp"
#include "efbm/model.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace efbm {

/// Samples of (F, X) for one experiment with summary statistics.
struct XBatch {
  CenteringConstant centering;
  std::vector<double> F;
  std::vector<double> X;
  double mean_X = 0.0;
  double mean_X_se = 0.0;
  double var_X = 0.0;
  double var_X_se = 0.0;
  double mean_F = 0.0;
  double mean_F_se = 0.0;
  double var_F = 0.0;
  double var_F_se = 0.0;
};

/// Summary statistics of given (F, X) samples.
XBatch summarize_x_batch(std::vector<double> F, std::vector<double> X, const CenteringConstant& centering);

/// Paths [0, n_paths) of stream (seed, increments), centred with `centering`.
XBatch sample_X_batch(const KernelTable& table, const ModelParams& params, const CenteringConstant& centering,
                      std::size_t n_paths, std::uint64_t seed);

struct KdeOptions {
  std::optional<double> bandwidth;  // Silverman rule when unset
  std::size_t grid_points = 1024;
  std::size_t bootstrap = 100;
  std::uint64_t seed = 0;
  std::size_t min_tail_samples = 50;
};

inline constexpr std::size_t kMinKdeSamples = 10000;

/// Gaussian KDE of rho_X on a uniform grid (linear binning, then convolution)
/// with bootstrap standard errors, and the induced rho_F(x) = rho_X(ln x - m) / x.
struct DensityEstimate {
  std::string domain = "X";
  bool point_mass = false;
  std::vector<double> grid;
  std::vector<double> density;
  std::vector<double> se;
  /// -d/dz ln rho_X and its bootstrap standard error.
  std::vector<double> log_slope;
  std::vector<double> log_slope_se;
  std::vector<double> f_grid;
  std::vector<double> f_density;
  std::vector<double> f_se;
  double bandwidth = 0.0;
  double centering = 0.0;
  std::size_t n_samples = 0;
  std::size_t bootstrap = 0;
  /// Resolved range: between the k-th smallest and k-th largest sample, k = min_tail_samples.
  double resolved_lo = 0.0;
  double resolved_hi = 0.0;
  std::size_t min_tail_samples = 50;

  double integral() const;
  double f_integral() const;
};

/// Silverman's rule 0.9 min(sd, IQR/1.34) n^{-1/5}.
double silverman_bandwidth(std::span<const double> samples);

DensityEstimate kde_log_domain(std::span<const double> x, double centering, const KdeOptions& options = {});

/// P(X <= x) <= exp(-x^2 / (2 sigma^2 T^{2H})) at each x <= 0.
BoundReport verify_gaussian_tail(std::span<const double> x, const ModelParams& params, std::span<const double> points);

/// Implied-constant profile of an envelope on one tail.
struct EnvelopeProfile {
  std::string tail;  // "left", "right", "remark"
  std::vector<double> z;
  std::vector<double> implied;
  std::vector<double> se;
  double inner_max = 0.0;
  double outer_max = 0.0;
  bool conclusive = false;
};

struct EnvelopeCheck {
  BoundReport left;   // k = 8 for x <= e^{E ln F}
  BoundReport right;  // k = 2 for x > e^{E ln F}
  BoundReport remark; // Gaussian shape in F for x <= E[F]
  BoundReport slope;  // -d/dz ln rho_X >= z / (sigma^2 T^{2H}) for z > 0
  EnvelopeProfile left_profile;
  EnvelopeProfile right_profile;
  EnvelopeProfile remark_profile;
};

/// Non-explosion rule: on each resolved tail the maximum of c(z) - 3 SE over
/// the outer third must not exceed 1.5 times the maximum over the inner third.
/// The Remark check needs E[F] and Var(F), taken from `batch`.
EnvelopeCheck verify_envelopes(const DensityEstimate& density, const ModelParams& params, const XBatch& batch);

/// Binned estimate of w_X(z) = E[X / Phi_X | X = z].
struct WProfile {
  std::vector<double> z;  // bin mean of X
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<std::size_t> count;
  std::vector<double> w;
  std::vector<double> se;
  std::vector<bool> resolved;
  std::size_t gaps = 0;
  /// Coarse h_X(z) = E[Phi_X^{-2} int D_s Phi_X E[D_s X|F_s] ds | X = z] (low precision).
  std::vector<double> h;
  BoundReport lower;          // w_X(z) >= z / (sigma^2 T^{2H}) on resolved bins z > 0
  BoundReport reconstruction; // exp(-int_0^z w_X) <= exp(-z^2 / (2 sigma^2 T^{2H}))
  std::size_t sign_mismatches = 0;
};

WProfile estimate_w_X(std::span<const double> x, std::span<const double> phi, const ModelParams& params,
                      double bin_width, std::size_t min_bin_count = 50,
                      std::span<const double> h_integrand = {});

/// E[exp(-lambda X)] <= exp(lambda^2 sigma^2 T^{2H} / 2).
BoundReport verify_mgf(std::span<const double> x, const ModelParams& params, std::span<const double> lambdas);

nlohmann::json to_json(const DensityEstimate& d);
nlohmann::json to_json(const EnvelopeProfile& p);
nlohmann::json to_json(const WProfile& w);

}  // namespace efbm
