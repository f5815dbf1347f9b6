#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace objforge {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent sub-seeds.
constexpr uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Sub-seed derivation: every random stream is keyed by (root seed, stream
// name, counter). Generators use the example index as the counter, which
// makes sharded generation independent of shard boundaries.
constexpr uint64_t derive_seed(uint64_t root, std::string_view stream,
                               uint64_t counter = 0) {
  return mix64(mix64(root ^ fnv1a(stream)) + counter);
}

inline Rng make_rng(uint64_t root, std::string_view stream,
                    uint64_t counter = 0) {
  return Rng(derive_seed(root, stream, counter));
}

// Uniform integer in [0, n). n must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace objforge
