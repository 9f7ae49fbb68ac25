#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace dnetreg {

/// Deterministic 64-bit RNG (splitmix64 seeding + xoshiro256++ core).
/// All randomness in the library flows through this type so that results
/// are reproducible bit-for-bit across runs and platforms; the standard
/// <random> distributions are avoided because their output is
/// implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    // splitmix64 to spread low-entropy seeds over the full state
    uint64_t x = seed;
    for (auto& s : state_) {
      x += 0x9e3779b97f4a7c15ULL;
      uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      s = z ^ (z >> 31);
    }
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n) {
    // rejection sampling to remove modulo bias
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  /// Standard normal via Box-Muller (pairless form; one trig call per draw).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Poisson draw (inversion for small mean, PTRS rejection otherwise).
  uint64_t poisson(double mean);

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_int(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Independent stream derived from this seed and a salt; used to hand
  /// out per-replicate / per-permutation / per-grid-cell generators.
  static Rng derive(uint64_t seed, uint64_t salt) {
    return Rng(seed ^ (0x9e3779b97f4a7c15ULL * (salt + 1)));
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t state_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

inline uint64_t Rng::poisson(double mean) {
  if (mean < 30.0) {
    // inversion by sequential search
    double p = std::exp(-mean);
    double cum = p;
    uint64_t k = 0;
    const double u = uniform();
    while (u > cum && k < 10000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cum += p;
    }
    return k;
  }
  // PTRS transformed rejection (Hoermann 1993)
  const double b = 0.931 + 2.53 * std::sqrt(mean);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    double u = uniform() - 0.5;
    double v = uniform();
    double us = 0.5 - std::fabs(u);
    double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        k * std::log(mean) - mean - std::lgamma(k + 1.0)) {
      return static_cast<uint64_t>(k);
    }
  }
}

}  // namespace dnetreg
