#pragma once

#include <cstdint>
#include <random>

namespace tssrbm {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(base) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

/// Named streams expanded from the single run seed.
enum class Stream : std::uint64_t { data = 1, chains = 2, init = 3, eval = 4 };

inline Rng make_stream(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, static_cast<std::uint64_t>(stream), index));
}

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double bernoulli(double p, Rng& rng) { return uniform01(rng) < p ? 1.0 : 0.0; }

}  // namespace tssrbm
