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

#ifndef FUZZYSPEC_HARNESS_SWEEP_HPP
#define FUZZYSPEC_HARNESS_SWEEP_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fuzzyspec/decoding.hpp"
#include "fuzzyspec/harness/config.hpp"
#include "fuzzyspec/harness/corpus.hpp"

namespace fuzzyspec::harness {

struct SweepPoint {
  AcceptancePolicy policy;
  double threshold = 0.0;
  std::size_t candidate_length = 1;
  std::uint64_t seed = 0;
};

/// Compact per-block record kept for trace summaries.
struct BlockStat {
  std::size_t prompt_index = 0;
  std::size_t context_length = 0;
  std::size_t proposed = 0;
  std::size_t accepted = 0;
  BlockEnd end = BlockEnd::kEndOfGeneration;
};

struct SweepRow {
  SweepPoint point;
  RunMetrics metrics;
  double proxy_speed = 0.0;
  std::optional<std::string> error;
  std::vector<BlockStat> blocks;
};

struct SweepResult {
  double cost_ratio = 0.125;
  std::vector<SweepRow> rows;
};

/// Cross product policy x threshold x length x seed, in that nesting order.
std::vector<SweepPoint> expand_grid(const ExperimentConfig& config);

/// Decodes every prompt for one point. Prompt i uses the stream
/// Rng(seed).split(prompt_stream_id(id)), so the stream does not depend on
/// the policy or on the prompt's position. Errors are captured in the row.
SweepRow run_point(const ModelPair& models, const std::vector<PromptRecord>& prompts,
                   const SweepPoint& point, const DraftingConfig& drafting,
                   std::size_t max_new_tokens, double cost_ratio);

/// Per-prompt metrics for one policy, same stream convention as run_point.
std::vector<RunMetrics> per_prompt_metrics(const ModelPair& models,
                                           const std::vector<PromptRecord>& prompts,
                                           const AcceptancePolicy& policy,
                                           const DraftingConfig& drafting,
                                           std::size_t max_new_tokens, std::uint64_t seed);

/// Runs the full grid over the configured split on up to `workers` threads.
/// Rows come back in grid order regardless of scheduling; `on_row` is
/// invoked from a single thread as each row completes, in grid order.
SweepResult run_sweep(const ExperimentConfig& config, const Corpus& corpus,
                      const ModelProvider& models,
                      const std::function<void(const SweepRow&)>& on_row = {});

}  // namespace fuzzyspec::harness

#endif  // FUZZYSPEC_HARNESS_SWEEP_HPP
