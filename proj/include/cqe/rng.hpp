// Copyright 2026 The cqe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Portable randomness. std::mt19937_64 output is fixed by the standard, but
// the std:: distributions are not, so the conversions to uniform reals,
// bounded integers and normals live here.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <utility>

namespace cqe::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Stateless hash of (seed, index) into [0, 1) with 53 random bits.
constexpr double keyed_uniform(std::uint64_t seed, std::uint64_t index) noexcept {
  const std::uint64_t h = splitmix64(splitmix64(seed) ^ splitmix64(~index));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Derives an independent engine seed for a named stream.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64(seed ^ splitmix64(stream * 0xD1B54A32D192ED03ULL));
}

using Engine = std::mt19937_64;

inline double uniform01(Engine& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

inline double uniform(Engine& gen, double lo, double hi) { return lo + (hi - lo) * uniform01(gen); }

/// Unbiased integer in [0, bound), bound >= 1.
inline std::uint64_t bounded(Engine& gen, std::uint64_t bound) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t draw = gen();
  while (draw >= limit) draw = gen();
  return draw % bound;
}

/// Standard normal via Box-Muller (one value per pair of uniforms).
inline double standard_normal(Engine& gen) {
  const double u1 = 1.0 - uniform01(gen);  // (0, 1]
  const double u2 = uniform01(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// In-place Fisher-Yates shuffle.
template <typename T>
void fisher_yates(std::span<T> items, Engine& gen) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(bounded(gen, i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace cqe::rng
