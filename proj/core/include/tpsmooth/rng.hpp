#pragma once

#include <array>
#include <cstdint>

namespace tpsmooth {

// Deterministic 64-bit generator (xoshiro256++) with the variate
// transformations the sampler needs. All arithmetic is our own, so a given
// (platform, seed) pair reproduces streams bit-exactly; the distributional
// contract is what tests rely on across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on the open interval (0, 1).
  double uniform();

  // Standard normal via the Marsaglia polar method. Caches the spare draw.
  double normal();

  // Gamma(shape, scale 1) via Marsaglia-Tsang squeeze; shape > 0.
  double gamma(double shape);

  // Inverse Gamma with the given shape and scale (rate of the reciprocal).
  double inverse_gamma(double shape, double scale);

  // Weibull with shape 1/2 and rate lambda (scale 1/lambda).
  double weibull_half(double rate);

 private:
  std::array<std::uint64_t, 4> state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stable per-index stream seed, used to give each chain or replicate an
// independent stream from one user-facing seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace tpsmooth
