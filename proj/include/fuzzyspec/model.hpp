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

#ifndef FUZZYSPEC_MODEL_HPP
#define FUZZYSPEC_MODEL_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "fuzzyspec/prob.hpp"
#include "fuzzyspec/rng.hpp"

namespace fuzzyspec {

/// Autoregressive next-token distribution provider.
///
/// Position p of a context refers to the distribution of the token that
/// follows context[0..p] inclusive, so next_dists(ctx, s)[j] must equal
/// next_dist(first s + j + 1 tokens of ctx).
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual std::size_t vocab_size() const = 0;

  /// Longest context the backend conditions on; 0 means unbounded.
  virtual std::size_t max_context_length() const = 0;

  virtual ProbDist next_dist(std::span<const TokenId> context) const = 0;

  /// One distribution per position in [start, context.size()). The default
  /// issues one next_dist call per position; remote backends override it
  /// with a single round trip.
  virtual std::vector<ProbDist> next_dists(std::span<const TokenId> context,
                                           std::size_t start) const;
};

/// Compares batched against unbatched evaluation at up to `samples` random
/// positions. Returns the number of positions that disagree.
std::size_t count_batch_inconsistencies(const ModelBackend& model,
                                        std::span<const TokenId> context,
                                        std::size_t samples, Rng& rng);

}  // namespace fuzzyspec

#endif  // FUZZYSPEC_MODEL_HPP
