#pragma once

#include <cstdint>
#include <random>

namespace tactwin {

/// splitmix64 finaliser; used to derive independent per-sample streams.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of sample `index` under `master_seed`. Depends only on the pair, so
/// serial and parallel generation draw identical streams.
constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
  return mix64(mix64(master_seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace tactwin
