#pragma once

#include <cstdint>

namespace mtfuse {

// SplitMix64 (Steele, Lea & Flood 2014). Chosen as the single source of
// randomness because it is fully specified in a few lines, has no
// implementation-defined behaviour, and is trivial to port bit-exactly to
// other languages. Every seeded feature of the toolkit (bootstrap
// resampling, corpus generation, parameter init, shuffling) draws from it.
class SplitMix64 {
public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n). Modulo reduction: the bias is < n / 2^64, which is
  // irrelevant at the corpus sizes involved, and the reduction is portable.
  uint64_t next_below(uint64_t n) { return next() % n; }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Derive an independent stream from (seed, stream id) so that one user
  // seed can feed several consumers without correlated output.
  static uint64_t derive(uint64_t seed, uint64_t stream) {
    SplitMix64 g(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
    return g.next();
  }

private:
  uint64_t state_;
};

}  // namespace mtfuse
