#pragma once

#include <cmath>
#include <cstdint>

namespace knockoff {

// SplitMix64 output function. Statistically solid (passes BigCrush) and,
// used as a pure function of (key, counter), gives a counter-based stream
// whose draws can be evaluated in any order.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Derives an independent sub-stream key. Adding streams (replicates, runs,
// folds) never perturbs draws of existing ones.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed + (stream + 1) * 0x9E3779B97F4A7C15ULL);
}

// Counter-based generator: draw i of the stream identified by `key` is a
// pure function of (key, i), independent of evaluation order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t bits(std::uint64_t counter) const {
    return splitmix64(key_ + (counter + 1) * 0x9E3779B97F4A7C15ULL);
  }

  // uniform in (0,1), never exactly 0 or 1
  double uniform(std::uint64_t counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  // standard normal via Box-Muller; each counter consumes its own pair of
  // uniforms, so normal(i) and normal(j) are independent for i != j
  double normal(std::uint64_t counter) const {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.28318530717958647692 * u2);
  }

 private:
  std::uint64_t key_;
};

// Sequential convenience wrapper over a counter stream.
class SequentialRng {
 public:
  explicit SequentialRng(std::uint64_t key) : rng_(key) {}

  std::uint64_t next_bits() { return rng_.bits(counter_++); }
  double next_uniform() { return rng_.uniform(counter_++); }

  double next_normal() {
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.28318530717958647692 * u2);
  }

  // uniform integer in [0, n); multiply-shift, bias negligible for n << 2^64
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_bits()) * n) >> 64);
  }

 private:
  CounterRng rng_;
  std::uint64_t counter_ = 0;
};

}  // namespace knockoff
