#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace fibrelens {

// Mixes a seed with a stream index so that nearby seeds give unrelated streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

// Seeded random source with platform-independent conversions.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The standard distributions are implementation-defined, so the
// conversions to uniform, normal and bounded integers are done here to keep
// generated data identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  double normal();

  // Circular complex Gaussian with E|z|^2 = variance.
  std::complex<double> complex_normal(double variance);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fibrelens
