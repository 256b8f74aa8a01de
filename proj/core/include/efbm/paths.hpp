#pragma once

#include "efbm/kernel_table.hpp"
#include "efbm/model.hpp"
#include "efbm/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace efbm {

/// Identifies the random stream a path was drawn from.
struct SeedRecord {
  std::uint64_t seed = 0;
  StreamPurpose purpose = StreamPurpose::increments;
  std::uint64_t index = 0;  // path id
  std::uint64_t sub = 0;
};

struct FbmPath {
  std::vector<double> grid;
  /// dB_j for cells j = 1..n (entry j-1); absent for Cholesky paths.
  std::optional<std::vector<double>> increments;
  /// B^H at nodes 0..n, values[0] = 0.
  std::vector<double> values;
  SeedRecord seed;

  std::size_t cells() const { return grid.size() - 1; }
};

/// I.i.d. N(0, dt_j) increments for the cells of `grid`.
std::vector<double> sample_bm_increments(std::span<const double> grid, const SeedRecord& seed);

/// Discrete Volterra map B^H_{t_i} = sum_{j<=i} c_ij dB_j.
FbmPath fbm_from_bm(const KernelTable& table, std::vector<double> increments, const SeedRecord& seed = {});

/// sample_bm_increments + fbm_from_bm.
FbmPath sample_fbm_volterra(const KernelTable& table, const SeedRecord& seed);

/// A block of Volterra paths held column-wise: increments (n x paths) and
/// values at nodes 1..n (n x paths). Column k is path `first + k`.
struct PathBlock {
  std::uint64_t first = 0;
  Eigen::MatrixXd increments;
  Eigen::MatrixXd values;
};

/// Generates paths [first, first + count) of stream (seed, purpose) into `block`.
/// Path p always uses RandomStream(seed, purpose, p), so results do not
/// depend on how a batch is split into blocks.
void generate_path_block(const KernelTable& table, std::uint64_t seed, StreamPurpose purpose,
                         std::uint64_t first, std::size_t count, PathBlock& block);

/// Default block size for batch drivers; recorded as the reduction partition.
inline constexpr std::size_t kPathBlock = 256;

/// Calls visit(block) for consecutive blocks covering [first, first + count),
/// generating blocks in parallel. `visit` runs concurrently and must only
/// write outputs owned by the block's path range.
void for_each_path_block(const KernelTable& table, std::uint64_t seed, StreamPurpose purpose,
                         std::uint64_t first, std::size_t count,
                         const std::function<void(const PathBlock&)>& visit);

/// Exact sampler at the grid nodes from the Cholesky factor of R_H(t_i, t_j).
class CholeskySampler {
 public:
  static constexpr std::size_t kMaxNodes = 4096;

  CholeskySampler(double hurst, std::span<const double> grid);

  /// Path without increments; RandomStream(seed.seed, seed.purpose, seed.index, seed.sub).
  FbmPath sample(const SeedRecord& seed) const;
  /// Factor L with L L^T = covariance of (B^H_{t_1}, ..., B^H_{t_n}).
  const Eigen::MatrixXd& factor() const { return factor_; }
  /// Diagonal jitter added before factorization (0 if none was needed).
  double jitter() const { return jitter_; }

 private:
  std::vector<double> grid_;
  Eigen::MatrixXd factor_;
  double jitter_ = 0.0;
};

FbmPath sample_fbm_cholesky(double hurst, std::span<const double> grid, const SeedRecord& seed);

/// Law of B^H_s given the increments of the first m cells (theta = t_m).
/// Arrays are indexed by node 0..n; for s <= theta the mean is the path value
/// and the variance is 0. For s > theta,
///   mean     N_{s,theta} = sum_{k<=m} c_sk dB_k,
///   variance v(s,theta)  = max(0, s^{2H} - sum_{k<=m} c_sk^2 dt_k).
struct ConditionalLaw {
  double theta = 0.0;
  std::size_t node = 0;
  std::vector<double> means;
  std::vector<double> variances;
};

ConditionalLaw conditional_law(const FbmPath& path, const KernelTable& table, double theta);
ConditionalLaw conditional_law_at(const FbmPath& path, const KernelTable& table, std::size_t node);

/// M_r = E[F | F_r] = sum_i q_i exp(a t_i + sigma N_{t_i,r} + sigma^2 v(t_i,r)/2),
/// trapezoid weights q on the shared grid.
double martingale_M(const FbmPath& path, const KernelTable& table, const ModelParams& params, double r);

/// M at every node 0..n together with the extremes of N over 0 <= theta <= s.
struct MartingaleProfile {
  std::vector<double> values;
  double min_conditional_mean = 0.0;
  double max_conditional_mean = 0.0;
};
MartingaleProfile martingale_profile(const FbmPath& path, const KernelTable& table, const ModelParams& params);

/// Throws UnsupportedOperation when the path has no increments and
/// DimensionMismatch when it is not on the table grid.
const std::vector<double>& require_increments(const FbmPath& path, const KernelTable& table);

}  // namespace efbm
