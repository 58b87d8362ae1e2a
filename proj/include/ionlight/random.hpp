#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ionlight {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for sub-stream `index` of a run seeded with `seed`:
// splitmix64(seed ^ splitmix64(index)). Used for trajectory segments and for the
// independent detector/background streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index));
}

// mt19937_64 with platform-independent real-valued draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1].
  double uniform_open_zero() { return 1.0 - uniform(); }

  double exponential(double rate) { return -std::log(uniform_open_zero()) / rate; }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ionlight
