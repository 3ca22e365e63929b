#pragma once

#include <cmath>
#include <cstdint>

namespace laghawkes {

/// Counter-based generator: draw i is a pure function of (seed, i), so a
/// stream can be split deterministically and replayed independently of
/// how far any copy has advanced. splitmix64 finalizer over a Weyl
/// sequence; plenty for Monte Carlo use here.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(mix(seed ^ 0x9E3779B97F4A7C15ull)) {}

  /// Derive an independent stream for substream index `stream`.
  static CounterRng split(std::uint64_t seed, std::uint64_t stream) {
    return CounterRng(mix(seed + 0x9E3779B97F4A7C15ull * (stream + 1)) ^ 0xBF58476D1CE4E5B9ull);
  }

  std::uint64_t next_u64() { return mix(seed_ + (++counter_) * 0x9E3779B97F4A7C15ull); }

  /// Uniform draw in the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Exp(1) draw.
  double exponential() { return -std::log(uniform()); }

  /// Standard normal via Box-Muller; consumes two uniforms per call.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace laghawkes
