// Seeded RNG with distributions implemented in-house so that draws are
// bit-identical across compilers and standard libraries.
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace phyrm {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a tag path,
// e.g. derive_seed(seed, {kTagScene, map_index}).
inline uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> path) {
  uint64_t s = splitmix64(base);
  for (uint64_t p : path) s = splitmix64(s ^ splitmix64(p));
  return s;
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive, rejection-sampled (unbiased).
  int64_t uniform_int(int64_t lo, int64_t hi) {
    const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<int64_t>(gen_());  // full 64-bit span
    uint64_t mask = range - 1;
    mask |= mask >> 1; mask |= mask >> 2; mask |= mask >> 4;
    mask |= mask >> 8; mask |= mask >> 16; mask |= mask >> 32;
    uint64_t v;
    do { v = gen_() & mask; } while (v >= range);
    return lo + static_cast<int64_t>(v);
  }

  // Standard normal via Box-Muller. No caching of the second value so a
  // stream's draws depend only on how many were taken before.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 gen_;
};

// Stream tags used throughout dataset generation and training.
namespace seedtag {
inline constexpr uint64_t kScene = 0x5343454eULL;       // scene geometry
inline constexpr uint64_t kObsMask = 0x4f42534dULL;     // observation masks
inline constexpr uint64_t kParamInit = 0x50494e49ULL;   // parameter init
inline constexpr uint64_t kBatch = 0x42415443ULL;       // batch composition
inline constexpr uint64_t kDiffusion = 0x44494646ULL;   // timesteps + noise
inline constexpr uint64_t kEval = 0x4556414cULL;        // evaluation sampling
}  // namespace seedtag

}  // namespace phyrm
