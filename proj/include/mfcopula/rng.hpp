#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mfcopula {

using Engine = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream-splitting rule: substream k of a run seeded with `seed` is an
// mt19937_64 seeded with splitmix64(splitmix64(seed) ^ splitmix64(k + 1)).
// Every replicate (or Monte Carlo chunk) owns one substream, so results do
// not depend on the number of threads.
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 1));
}

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream) {
  return Engine(substream_seed(seed, stream));
}

// Uniform on the open interval (0, 1), 53 random bits.
inline double open_uniform(Engine& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double standard_exponential(Engine& rng) { return -std::log(open_uniform(rng)); }

}  // namespace mfcopula
