// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <cstdint>
#include <string_view>
#include <vector>

namespace refsd::rng {

// Boost's engine and distribution produce the same streams on every
// platform, which keeps seeded campaigns and prompts reproducible.
using Engine = boost::random::mt19937_64;

// splitmix64 finalizer; derives independent streams from (seed, stream).
inline std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t stream_id(std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline Engine engine(std::uint64_t seed, std::uint64_t stream = 0) { return Engine(mix(seed, stream)); }

inline std::size_t uniform_index(Engine& eng, std::size_t n) {
  return boost::random::uniform_int_distribution<std::size_t>(0, n - 1)(eng);
}

inline double uniform_real(Engine& eng, double lo, double hi) {
  return boost::random::uniform_real_distribution<double>(lo, hi)(eng);
}

// Seeded Fisher-Yates over [0, n); only the first `count` slots are drawn.
inline std::vector<std::size_t> sample_without_replacement(Engine& eng, std::size_t n, std::size_t count) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < count && i + 1 < n; ++i) {
    const std::size_t j = boost::random::uniform_int_distribution<std::size_t>(i, n - 1)(eng);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace refsd::rng
