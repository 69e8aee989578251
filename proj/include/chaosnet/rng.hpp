#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace chaosnet {

// Seeded random source passed explicitly to everything that draws numbers.
// The engine is std::mt19937_64, whose output sequence is fixed by the standard;
// the conversions to uniform/normal/index values are done here rather than with
// <random> distributions so a seed yields the same stream on every toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller; the second variate is discarded.
  double normal();
  // Uniform integer in [0, n), rejection-sampled to avoid modulo bias. n > 0.
  std::uint64_t index(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace chaosnet
