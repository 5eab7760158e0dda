#pragma once

#include <cstdint>
#include <random>

namespace dtrci {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seeds depend only on (parent, index), so work can be scheduled in any
// order without changing any stream.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return splitmix64(parent ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

// Named sub-streams of one replicate seed.
enum class Stream : std::uint64_t { gamma = 0x67616d6d61ULL, redraw = 0x7265647277ULL };

inline std::uint64_t derive_seed(std::uint64_t parent, Stream s, std::uint64_t index = 0) {
  return derive_seed(derive_seed(parent, static_cast<std::uint64_t>(s)), index);
}

}  // namespace dtrci
