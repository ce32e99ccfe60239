#pragma once

#include <cstdint>
#include <random>
#include <utility>

namespace landseg {

// Seedable deterministic generator. All randomness in the toolkit flows
// through this wrapper; raw engine words are mapped to values directly
// instead of via std::*_distribution, whose output is implementation
// defined and would break run-to-run reproducibility claims.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform index in [0, n); n must be positive.
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

  // In-place Fisher-Yates shuffle.
  template <typename Seq>
  void shuffle(Seq& seq) {
    for (std::size_t i = seq.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(seq[i - 1], seq[j]);
    }
  }

  // Independent child stream, e.g. one per scene or per layer.
  static Rng stream(std::uint64_t seed, std::uint64_t salt) {
    return Rng(seed ^ ((salt + 1) * 0x9e3779b97f4a7c15ull));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace landseg
