#pragma once

#include <cstdint>
#include <random>

namespace patrec {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (0x517cc1b727220a95ULL * (stream + 1));
  std::uint64_t z = splitmix64(s);
  return z ^ splitmix64(s);
}

// Deterministic stream keyed by (seed, stream). The stream id decouples
// consumers (phantom index, epoch number, parameter tensor) so generation
// order never affects content. Uniform doubles are derived from the raw
// 64-bit output directly; std::uniform_real_distribution is not portable
// bit-for-bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : eng_(mix_seed(seed, stream)) {}

  std::uint64_t next_u64() { return eng_(); }

  // in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // in [0, n)
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::mt19937_64 eng_;
};

} // namespace patrec
