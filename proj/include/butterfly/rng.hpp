#pragma once

#include <cstdint>

namespace butterfly {

// Counter-based random streams.
//
// Every uniform variate is a pure function of
//   (master seed, replicate, time step, purpose, stage, index),
// so draws for different particle indices can be produced in any order, or
// concurrently, and still be bit-identical to the sequential loop.

enum class Purpose : std::uint64_t {
  Initialize = 1,
  Resample = 2,
  Mutate = 3,
  Simulate = 4,
  ModelGeneration = 5,
  InputGeneration = 6,
};

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

// 53 random bits mapped to [0, 1).
inline double bits_to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
  std::uint64_t step = 0;
};

// One logical stream per (key, purpose, stage); indexed by particle.
class Substream {
 public:
  Substream(const StreamKey& key, Purpose purpose, std::uint64_t stage) noexcept;

  std::uint64_t bits(std::uint64_t index) const noexcept {
    return mix64(prefix_ + (index + 1) * 0x9E3779B97F4A7C15ULL);
  }
  double uniform(std::uint64_t index) const noexcept { return bits_to_unit(bits(index)); }

 private:
  std::uint64_t prefix_;
};

}  // namespace butterfly
