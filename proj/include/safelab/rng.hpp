// Copyright 2026 The safelab Authors. All Rights Reserved.
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
// =============================================================================

#ifndef SAFELAB_RNG_HPP
#define SAFELAB_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace safelab {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to turn structured tags (run, block, trial...)
/// into well-separated stream seeds so that every random draw in a simulation
/// is addressable and independent of scheduling order.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix_seed(base);
  for (std::uint64_t t : tags) s = mix_seed(s ^ mix_seed(t + 0x632be59bd9b4e019ULL));
  return s;
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Stream tags.
namespace stream {
inline constexpr std::uint64_t kLatent = 1;
inline constexpr std::uint64_t kStart = 2;
inline constexpr std::uint64_t kNoise = 3;
inline constexpr std::uint64_t kExpand = 4;
inline constexpr std::uint64_t kAgent = 5;
inline constexpr std::uint64_t kBlock = 6;
inline constexpr std::uint64_t kPermutation = 7;
}  // namespace stream

}  // namespace safelab

#endif  // SAFELAB_RNG_HPP
