#pragma once

#include <cstdint>
#include <random>

namespace activerank {

// Stream splitting: every consumer derives its own seed from the run seed
// and a (stream, counter) pair through SplitMix64, then drives a private
// mt19937_64. Streams never share generator state.
enum class RngStream : std::uint64_t {
  acquisition = 1,
  oracle_noise = 2,
  landscape = 3,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, RngStream stream,
                                 std::uint64_t counter = 0) {
  return splitmix64(splitmix64(seed ^ splitmix64(std::uint64_t(stream))) +
                    counter);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, RngStream stream,
                                std::uint64_t counter = 0) {
  return std::mt19937_64(derive_seed(seed, stream, counter));
}

}  // namespace activerank
