#pragma once

// Seedable, splittable PRNG used for all workload randomness. SplitMix64 is
// portable across platforms and compilers (no reliance on std::* distribution
// implementations, which differ between standard libraries).

#include <cmath>
#include <cstdint>

namespace batchsim {

class SplitMix64 {
 public:
  SplitMix64() = default;
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  double exponential(double mean) { return -mean * std::log(1.0 - next_double()); }

  // Pareto with shape alpha and scale kappa (support [kappa, inf)).
  double pareto(double alpha, double kappa) {
    return kappa * std::pow(1.0 - next_double(), -1.0 / alpha);
  }

  // Derive an independent stream; used so that e.g. the arrival stream does
  // not shift when the size stream draws a different number of samples.
  static SplitMix64 stream(std::uint64_t seed, std::uint64_t tag) {
    SplitMix64 mix(seed ^ (0xA0761D6478BD642FULL * (tag + 1)));
    SplitMix64 out(mix.next_u64());
    return out;
  }

 private:
  std::uint64_t state_ = 0;
};

}  // namespace batchsim
