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

#include "fuzzyspec/model.hpp"

#include <algorithm>

namespace fuzzyspec {

std::vector<ProbDist> ModelBackend::next_dists(std::span<const TokenId> context,
                                               std::size_t start) const {
  std::vector<ProbDist> out;
  if (start >= context.size()) return out;
  out.reserve(context.size() - start);
  for (std::size_t pos = start; pos < context.size(); ++pos) {
    out.push_back(next_dist(context.first(pos + 1)));
  }
  return out;
}

std::size_t count_batch_inconsistencies(const ModelBackend& model,
                                        std::span<const TokenId> context,
                                        std::size_t samples, Rng& rng) {
  if (context.empty()) return 0;
  const std::size_t start = static_cast<std::size_t>(rng.next_u64() % context.size());
  const std::vector<ProbDist> batched = model.next_dists(context, start);
  if (batched.size() != context.size() - start) return batched.size() + 1;
  std::size_t mismatches = 0;
  const std::size_t checks = std::min(samples, batched.size());
  for (std::size_t i = 0; i < checks; ++i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_u64() % batched.size());
    if (!(model.next_dist(context.first(start + j + 1)) == batched[j])) ++mismatches;
  }
  return mismatches;
}

}  // namespace fuzzyspec
