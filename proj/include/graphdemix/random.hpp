#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "graphdemix/core.hpp"

namespace graphdemix {

/// splitmix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent child seed from (seed, stream).  Used to give every
/// grid cell / trial / purpose its own reproducible stream regardless of
/// execution order or thread count.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed ^ mix64(stream));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(mix64(seed));
}

/// k distinct indices from [0, n), uniformly at random, sorted ascending.
inline std::vector<Index> sample_without_replacement(Index n, Index k,
                                                     std::mt19937_64& rng) {
  if (k < 0 || k > n)
    throw parameter_error("sample_without_replacement: need 0 <= k <= n");
  // Floyd's algorithm keeps the draw O(k) regardless of n.
  std::vector<Index> picked;
  picked.reserve(static_cast<std::size_t>(k));
  for (Index j = n - k; j < n; ++j) {
    std::uniform_int_distribution<Index> dist(0, j);
    const Index t = dist(rng);
    bool seen = false;
    for (const Index v : picked) seen |= (v == t);
    picked.push_back(seen ? j : t);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

inline RVec gaussian_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  RVec v(n);
  for (Index i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

/// Circularly-symmetric complex Gaussian with E|z|^2 = 1 per entry.
inline CVec complex_gaussian_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(2.0));
  CVec v(n);
  for (Index i = 0; i < n; ++i) v(i) = Complex(dist(rng), dist(rng));
  return v;
}

}  // namespace graphdemix
