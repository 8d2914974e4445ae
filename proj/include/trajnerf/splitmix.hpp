#pragma once

#include <cstdint>

namespace trajnerf {

// splitmix64 finalizer. Counter-based random streams are built by chaining
// it over (seed, step, index) keys, so draws never depend on call order or
// chunking.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Uniform double in [0, 1) from 64 random bits.
inline double unit_double(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace trajnerf
