#pragma once

#include <cstdint>
#include <random>

namespace skaudit {

// SplitMix64 finalizer. Used as the stateless hash behind seeded binning so
// that encoder tables never need to be materialized.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Bin assignment for tuple index `x` under `seed`, into `m` bins.
// This identity is part of the reproducibility contract: same (x, seed, m)
// gives the same bin on every platform.
inline std::uint64_t hash_bin(std::uint64_t x, std::uint64_t seed, std::uint64_t m) {
  return mix64(mix64(x) ^ seed) % m;
}

// Uniform double in [0, 1) from a raw 64-bit word: top 53 bits, fixed ladder.
// std::generate_canonical is implementation-defined, so we do it by hand.
inline double canonical_double(std::uint64_t raw) {
  return static_cast<double>(raw >> 11) * 0x1.0p-53;
}

// Seedable generator with a pinned algorithm (mt19937_64) and a pinned
// uniform-double ladder. std::mt19937_64 output is fully specified by the
// standard, so streams are identical across compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  std::uint64_t next_u64() { return eng_(); }
  double next_double() { return canonical_double(eng_()); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace skaudit
