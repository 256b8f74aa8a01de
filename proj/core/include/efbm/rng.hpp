#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace efbm {

/// Tags that separate independent random streams drawn from one experiment seed.
enum class StreamPurpose : std::uint32_t {
  increments = 1,  // outer driving Brownian increments
  centering = 2,   // batch used to freeze E[ln F]
  inner = 3,       // nested conditional simulations
  cholesky = 4,
  bootstrap = 5,
  synthetic = 6,
  test = 7,
};

/// Philox4x32-10 block function. Exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based random stream. A stream is identified by (seed, purpose, sub)
/// which form the Philox key, and by `index` (typically a path id) which fills
/// the upper counter words; the lower words count blocks. Two streams that
/// differ in any identifier never overlap.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index,
               std::uint64_t sub = 0);

  std::uint64_t next_u64();
  /// Uniform on (0, 1].
  double uniform();
  double normal();
  void fill_normal(std::span<double> out, double scale = 1.0);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace efbm
