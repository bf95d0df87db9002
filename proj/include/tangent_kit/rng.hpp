#pragma once

// Seed derivation. Every random stream is an mt19937_64 seeded from a root
// seed mixed with a (study, width, seed index) counter, so cells of a sweep
// can run in any order.

#include <cstdint>
#include <random>
#include <string_view>

namespace tangent_kit {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a, used only to turn study names into counters.
inline std::uint64_t hash_name(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view study, std::uint64_t width,
                                 std::uint64_t seed_index) {
  std::uint64_t s = splitmix64(root);
  s = splitmix64(s ^ hash_name(study));
  s = splitmix64(s ^ width);
  return splitmix64(s ^ seed_index);
}

using Rng = std::mt19937_64;

}  // namespace tangent_kit
