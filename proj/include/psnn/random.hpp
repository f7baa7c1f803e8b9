#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace psnn {

/// Random stream type used throughout the library. Every consumer takes the
/// stream explicitly; nothing in the library owns a global generator.
using RandomStream = std::mt19937_64;

/// Purposes mixed into derived stream seeds so that independent uses of one
/// experiment seed never share draws.
enum class StreamPurpose : std::uint64_t {
  init = 1,
  shuffle = 2,
  train = 3,
  eval = 4,
  oracle = 5,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream keyed by (seed, purpose, path...). Two distinct keys give
/// statistically independent streams; equal keys give identical streams.
inline RandomStream derive_stream(std::uint64_t seed, StreamPurpose purpose,
                                  std::initializer_list<std::uint64_t> path = {}) {
  std::uint64_t h = splitmix64(seed ^ 0x5053'4e4e'0000'0000ULL);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p));
  return RandomStream(h);
}

/// Uniform double in [0, 1) with 53 random bits; bit-identical on every
/// platform for the same stream state.
inline double uniform01(RandomStream& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace psnn
