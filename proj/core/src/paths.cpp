#include "efbm/paths.hpp"

#include "efbm/errors.hpp"
#include "efbm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace efbm {

std::vector<double> sample_bm_increments(std::span<const double> grid, const SeedRecord& seed) {
  if (grid.size() < 2) throw DimensionMismatch("sample_bm_increments: grid needs two nodes");
  RandomStream rng(seed.seed, seed.purpose, seed.index, seed.sub);
  std::vector<double> dB(grid.size() - 1);
  for (std::size_t j = 0; j < dB.size(); ++j) dB[j] = std::sqrt(grid[j + 1] - grid[j]) * rng.normal();
  return dB;
}

FbmPath fbm_from_bm(const KernelTable& table, std::vector<double> increments, const SeedRecord& seed) {
  const std::size_t n = table.cells();
  if (increments.size() != n) {
    throw DimensionMismatch("fbm_from_bm: " + std::to_string(increments.size()) + " increments for " +
                            std::to_string(n) + " cells");
  }
  const Eigen::Map<const Eigen::VectorXd> dB(increments.data(), static_cast<Eigen::Index>(n));
  const Eigen::VectorXd b = table.coefficients().triangularView<Eigen::Lower>() * dB;
  FbmPath path;
  path.grid.assign(table.grid().begin(), table.grid().end());
  path.values.resize(n + 1);
  path.values[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) path.values[i + 1] = b(static_cast<Eigen::Index>(i));
  path.increments = std::move(increments);
  path.seed = seed;
  return path;
}

FbmPath sample_fbm_volterra(const KernelTable& table, const SeedRecord& seed) {
  return fbm_from_bm(table, sample_bm_increments(table.grid(), seed), seed);
}

void generate_path_block(const KernelTable& table, std::uint64_t seed, StreamPurpose purpose,
                         std::uint64_t first, std::size_t count, PathBlock& block) {
  const auto n = static_cast<Eigen::Index>(table.cells());
  const auto cols = static_cast<Eigen::Index>(count);
  block.first = first;
  block.increments.resize(n, cols);
  for (Eigen::Index k = 0; k < cols; ++k) {
    RandomStream rng(seed, purpose, first + static_cast<std::uint64_t>(k));
    for (Eigen::Index j = 0; j < n; ++j) {
      block.increments(j, k) = std::sqrt(table.step(static_cast<std::size_t>(j) + 1)) * rng.normal();
    }
  }
  block.values.noalias() = table.coefficients().triangularView<Eigen::Lower>() * block.increments;
}

void for_each_path_block(const KernelTable& table, std::uint64_t seed, StreamPurpose purpose,
                         std::uint64_t first, std::size_t count,
                         const std::function<void(const PathBlock&)>& visit) {
  const BlockPartition part{count, kPathBlock};
  parallel_for(part.blocks(), [&](std::size_t b) {
    PathBlock block;
    generate_path_block(table, seed, purpose, first + part.begin(b), part.end(b) - part.begin(b), block);
    visit(block);
  });
}

CholeskySampler::CholeskySampler(double hurst, std::span<const double> grid)
    : grid_(grid.begin(), grid.end()) {
  if (grid.size() < 2) throw DimensionMismatch("CholeskySampler: grid needs two nodes");
  const std::size_t n = grid.size() - 1;
  if (n > kMaxNodes) {
    throw ResourceError("CholeskySampler: " + std::to_string(n) + " nodes exceeds " + std::to_string(kMaxNodes));
  }
  const auto en = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd cov(en, en);
  for (Eigen::Index i = 0; i < en; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      cov(i, j) = covariance(hurst, grid[static_cast<std::size_t>(i) + 1], grid[static_cast<std::size_t>(j) + 1]);
      cov(j, i) = cov(i, j);
    }
  }
  const double scale = cov.diagonal().maxCoeff();
  for (double jitter : {0.0, 1e-14, 1e-12, 1e-10}) {
    Eigen::MatrixXd a = cov;
    a.diagonal().array() += jitter * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      factor_ = llt.matrixL();
      jitter_ = jitter * scale;
      return;
    }
  }
  throw FactorizationError("fBm covariance is not positive definite after regularization");
}

FbmPath CholeskySampler::sample(const SeedRecord& seed) const {
  const auto n = factor_.rows();
  RandomStream rng(seed.seed, seed.purpose, seed.index, seed.sub);
  Eigen::VectorXd z(n);
  rng.fill_normal({z.data(), static_cast<std::size_t>(n)});
  const Eigen::VectorXd b = factor_.triangularView<Eigen::Lower>() * z;
  FbmPath path;
  path.grid = grid_;
  path.values.assign(static_cast<std::size_t>(n) + 1, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) path.values[static_cast<std::size_t>(i) + 1] = b(i);
  path.seed = seed;
  return path;
}

FbmPath sample_fbm_cholesky(double hurst, std::span<const double> grid, const SeedRecord& seed) {
  return CholeskySampler(hurst, grid).sample(seed);
}

const std::vector<double>& require_increments(const FbmPath& path, const KernelTable& table) {
  if (!path.increments) throw UnsupportedOperation("path has no driving increments (Cholesky-sampled)");
  if (path.increments->size() != table.cells() || path.values.size() != table.cells() + 1) {
    throw DimensionMismatch("path is not on the kernel table grid");
  }
  return *path.increments;
}

ConditionalLaw conditional_law_at(const FbmPath& path, const KernelTable& table, std::size_t node) {
  const auto& dB = require_increments(path, table);
  const std::size_t n = table.cells();
  if (node > n) throw DomainError("conditional_law: node outside the grid");
  const double two_h = 2.0 * table.hurst();
  ConditionalLaw law;
  law.node = node;
  law.theta = table.grid()[node];
  law.means.assign(n + 1, 0.0);
  law.variances.assign(n + 1, 0.0);
  for (std::size_t i = 1; i <= n; ++i) {
    if (i <= node) {
      law.means[i] = path.values[i];
      continue;
    }
    double mean = 0.0;
    double energy = 0.0;
    for (std::size_t k = 1; k <= node; ++k) {
      const double c = table.coefficient(i, k);
      mean += c * dB[k - 1];
      energy += c * c * table.step(k);
    }
    law.means[i] = mean;
    law.variances[i] = std::max(0.0, std::pow(table.grid()[i], two_h) - energy);
  }
  return law;
}

ConditionalLaw conditional_law(const FbmPath& path, const KernelTable& table, double theta) {
  require_increments(path, table);
  return conditional_law_at(path, table, table.node_index(theta));
}

double martingale_M(const FbmPath& path, const KernelTable& table, const ModelParams& params, double r) {
  params.validate();
  const ConditionalLaw law = conditional_law(path, table, r);
  const auto q = trapezoid_weights(table.grid());
  const double a = params.drift;
  const double s = params.volatility;
  double m = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    m += q[i] * std::exp(a * table.grid()[i] + s * law.means[i] + 0.5 * s * s * law.variances[i]);
  }
  return m;
}

MartingaleProfile martingale_profile(const FbmPath& path, const KernelTable& table, const ModelParams& params) {
  params.validate();
  const auto& dB = require_increments(path, table);
  const std::size_t n = table.cells();
  const auto grid = table.grid();
  const auto q = trapezoid_weights(grid);
  const double a = params.drift;
  const double s = params.volatility;
  std::vector<double> target(n + 1);
  for (std::size_t i = 0; i <= n; ++i) target[i] = std::pow(grid[i], 2.0 * table.hurst());
  std::vector<double> partial_mean(n + 1, 0.0);
  std::vector<double> partial_energy(n + 1, 0.0);
  MartingaleProfile out;
  out.values.assign(n + 1, 0.0);
  double lo = 0.0;
  double hi = 0.0;
  for (std::size_t m = 0; m <= n; ++m) {
    if (m > 0) {
      const double db = dB[m - 1];
      const double dt = table.step(m);
      for (std::size_t i = m; i <= n; ++i) {
        const double c = table.coefficient(i, m);
        partial_mean[i] += c * db;
        partial_energy[i] += c * c * dt;
      }
    }
    double value = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      const double v = i > m ? std::max(0.0, target[i] - partial_energy[i]) : 0.0;
      value += q[i] * std::exp(a * grid[i] + s * partial_mean[i] + 0.5 * s * s * v);
      if (i >= m) {
        lo = std::min(lo, partial_mean[i]);
        hi = std::max(hi, partial_mean[i]);
      }
    }
    out.values[m] = value;
  }
  out.min_conditional_mean = lo;
  out.max_conditional_mean = hi;
  return out;
}

}  // namespace efbm
