#pragma once

#include <cstdint>
#include <cmath>

namespace qmeas {

/// splitmix64: tiny deterministic generator used for seeding and for all
/// reproducibility-sensitive draws (identical output on every platform).
struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  /// uniform in [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  /// standard normal via Box-Muller
  double normal() {
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }
};

/// Independent stream for trajectory `index` under a run seed. The child
/// state is the fully mixed generator output at orbit position `index`, so
/// stream starting points carry no affine structure in the index (affine
/// starting points make whole streams shifted copies of each other).
inline SplitMix64 stream_rng(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 seeder(seed + 0x9E3779B97F4A7C15ULL * index);
  return SplitMix64(seeder.next());
}

}  // namespace qmeas
