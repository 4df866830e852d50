// Copyright 2026 The fuzzyspec Authors.
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

#ifndef FUZZYSPEC_RNG_HPP
#define FUZZYSPEC_RNG_HPP

#include <cstdint>

namespace fuzzyspec {

/// Counter-based splittable generator.
///
/// Output n of a stream is a SplitMix64 finalisation of key + (n + 1) * gamma,
/// so a stream is fully described by (key, counter) and independent streams
/// are obtained by re-keying with split(). Identical seed and identical call
/// sequence always produce identical draws.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
      : key_(derive_key(seed, stream)) {}

  /// Independent child stream; does not advance this stream.
  Rng split(std::uint64_t stream) const noexcept {
    Rng child;
    child.key_ = derive_key(key_, stream);
    return child;
  }

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix(key_ + counter_ * kGamma);
  }

  /// Uniform double in [0, 1) with 53 random bits. One call is one draw.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  std::uint64_t draws() const noexcept { return counter_; }
  std::uint64_t key() const noexcept { return key_; }

  // UniformRandomBitGenerator, for std::shuffle and friends.
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }
  result_type operator()() noexcept { return next_u64(); }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t derive_key(std::uint64_t seed,
                                            std::uint64_t stream) noexcept {
    return mix(mix(seed + kGamma) ^ mix(stream * kGamma + 0x632be59bd9b4e019ULL));
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace fuzzyspec

#endif  // FUZZYSPEC_RNG_HPP
