#pragma once

#include <cstdint>
#include <random>

namespace flowmarket {

// Derives independent deterministic streams from a base seed. Splitmix is used
// only for seed mixing; the draws themselves come from std::mt19937_64, whose
// output sequence is fixed by the standard, so results are platform-stable.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream id for (seed, tag, index) triples, e.g. one stream per trial.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s ^= tag * 0xda942042e4dd58b5ULL;
  std::uint64_t b = splitmix64(s);
  s ^= index + 0x165667b19e3779f9ULL;
  return a ^ b ^ splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1). Bit mapping is hand-rolled because the standard leaves
  // std::uniform_real_distribution's algorithm unspecified.
  double next_unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; used for quantities that must stay strictly positive.
  double next_unit_positive() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + next_unit() * (hi - lo); }

  // Uniform on (lo, hi]; keeps capacities strictly above a zero lower bound.
  double uniform_positive(double lo, double hi) {
    return lo + next_unit_positive() * (hi - lo);
  }

  // Uniform integer in [0, bound) by rejection, unbiased.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % bound;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace flowmarket
