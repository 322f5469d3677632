#pragma once

#include <cstdint>
#include <random>

namespace efnlm {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed for replication `index` of a run with `master_seed`.
std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::uint64_t index);

/// Deterministic random stream. Every variate is built from raw 64-bit
/// Mersenne Twister output by code in this library, so streams are
/// reproducible across standard-library implementations.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1).
  double uniform();
  double standard_normal();
  /// Gamma(shape, scale 1) by Marsaglia-Tsang squeeze/rejection; shapes
  /// below one are boosted through U^{1/shape}.
  double standard_gamma(double shape);

 private:
  std::mt19937_64 engine_;
};

}  // namespace efnlm
