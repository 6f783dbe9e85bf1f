#ifndef DPSVRG_RNG_HPP
#define DPSVRG_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace dpsvrg {

// Deterministic random stream. All randomness in the library flows through
// this wrapper so that runs are reproducible bit-for-bit across platforms:
// the raw mt19937_64 sequence is pinned by the standard, and the mappings to
// doubles/ints below avoid the implementation-defined <random> distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller. The spare value is discarded so the
  // stream position does not depend on call history.
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    const int v = static_cast<int>(uniform01() * static_cast<double>(n));
    return v >= n ? n - 1 : v;
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // Independent substream, e.g. one per node.
  static Rng substream(std::uint64_t seed, std::uint64_t index) {
    return Rng(splitmix64(seed) ^ splitmix64(0x123456789abcdefULL + index));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dpsvrg

#endif
