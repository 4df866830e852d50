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

#include "fuzzyspec/harness/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fuzzyspec/error.hpp"
#include "fuzzyspec/harness/sweep.hpp"

namespace fuzzyspec::harness {

namespace {

RunMetrics aggregate(const ModelPair& models, const std::vector<PromptRecord>& prompts,
                     const AcceptancePolicy& policy, std::size_t length,
                     const DecodeSettings& settings) {
  DraftingConfig cfg = settings.drafting;
  cfg.candidate_length = length;
  RunMetrics total;
  for (const RunMetrics& m :
       per_prompt_metrics(models, prompts, policy, cfg, settings.max_new_tokens, settings.seed)) {
    total += m;
  }
  return total;
}

/// a.target_calls / a.tokens < b.target_calls / b.tokens, in exact integer
/// arithmetic. Runs that emitted nothing rank last.
bool fewer_calls_per_token(const RunMetrics& a, const RunMetrics& b) {
  if (a.tokens == 0) return false;
  if (b.tokens == 0) return true;
  return static_cast<unsigned __int128>(a.target_calls) * b.tokens <
         static_cast<unsigned __int128>(b.target_calls) * a.tokens;
}

}  // namespace

LengthChoice select_candidate_length(const ModelPair& models,
                                     const std::vector<PromptRecord>& dev,
                                     const std::vector<std::size_t>& length_grid,
                                     const AcceptancePolicy& policy,
                                     const DecodeSettings& settings) {
  if (dev.empty()) throw Error(ErrorCode::kInsufficientCorpus, "dev set is empty");
  if (length_grid.empty()) throw Error(ErrorCode::kInvalidArgument, "length grid is empty");
  std::vector<std::size_t> grid = length_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  LengthChoice choice;
  const RunMetrics* best = nullptr;
  for (std::size_t length : grid) {
    choice.evaluated.emplace_back(length, aggregate(models, dev, policy, length, settings));
  }
  for (const auto& [length, metrics] : choice.evaluated) {
    // Ascending grid: only a strict improvement replaces the incumbent.
    if (best == nullptr || fewer_calls_per_token(metrics, *best)) {
      best = &metrics;
      choice.chosen = length;
    }
  }
  return choice;
}

ThresholdMatch match_sd_threshold(const ModelPair& models,
                                  const std::vector<PromptRecord>& dev, DivergenceKind kind,
                                  std::size_t candidate_length,
                                  const std::vector<double>& threshold_grid,
                                  const DecodeSettings& settings) {
  if (dev.empty()) throw Error(ErrorCode::kInsufficientCorpus, "dev set is empty");
  if (threshold_grid.empty()) throw Error(ErrorCode::kInvalidArgument, "threshold grid is empty");
  std::vector<double> grid = threshold_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  ThresholdMatch match;
  match.sd_acceptance_pct =
      aggregate(models, dev, policy::SD{}, candidate_length, settings).acceptance_pct();
  double best_gap = std::numeric_limits<double>::infinity();
  for (double threshold : grid) {
    const RunMetrics m =
        aggregate(models, dev, policy::FSD{kind, threshold}, candidate_length, settings);
    match.evaluated.emplace_back(threshold, m);
    const double gap = std::abs(m.acceptance_pct() - match.sd_acceptance_pct);
    if (gap < best_gap - 1e-12) {
      best_gap = gap;
      match.chosen = threshold;
    }
  }
  return match;
}

TuningTable tune_threshold_on_dev(const ModelPair& models,
                                  const std::vector<PromptRecord>& train,
                                  const std::vector<PromptRecord>& test, DivergenceKind kind,
                                  const std::vector<double>& thresholds,
                                  std::size_t candidate_length,
                                  const std::vector<std::size_t>& dev_sizes,
                                  std::size_t trials, const DecodeSettings& settings) {
  if (dev_sizes.empty() || thresholds.empty() || trials == 0) {
    throw Error(ErrorCode::kInvalidArgument, "tuning needs sizes, thresholds and trials");
  }
  const std::size_t largest = *std::max_element(dev_sizes.begin(), dev_sizes.end());
  if (train.size() < largest || largest == 0) {
    throw Error(ErrorCode::kInsufficientCorpus,
                "train split has " + std::to_string(train.size()) +
                    " prompts, dev size " + std::to_string(largest) + " requested");
  }
  if (test.empty()) throw Error(ErrorCode::kInsufficientCorpus, "test split is empty");

  // Dev samples: indices into `train`, fixed across thresholds.
  std::vector<std::vector<std::vector<std::size_t>>> samples(dev_sizes.size());
  for (std::size_t s = 0; s < dev_sizes.size(); ++s) {
    for (std::size_t trial = 0; trial < trials; ++trial) {
      Rng rng = Rng(settings.seed, 0x7e57).split(dev_sizes[s] * 1000003ULL + trial);
      std::vector<std::size_t> order(train.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      // Partial Fisher-Yates; only the first n slots are needed.
      for (std::size_t i = 0; i < dev_sizes[s]; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_u64() % (order.size() - i));
        std::swap(order[i], order[j]);
      }
      order.resize(dev_sizes[s]);
      samples[s].push_back(std::move(order));
    }
  }

  DraftingConfig cfg = settings.drafting;
  cfg.candidate_length = candidate_length;

  TuningTable table;
  table.dev_sizes = dev_sizes;
  table.trials = trials;
  for (double threshold : thresholds) {
    const AcceptancePolicy policy = policy::FSD{kind, threshold};
    const std::vector<RunMetrics> train_metrics =
        per_prompt_metrics(models, train, policy, cfg, settings.max_new_tokens, settings.seed);
    RunMetrics test_total;
    for (const RunMetrics& m :
         per_prompt_metrics(models, test, policy, cfg, settings.max_new_tokens, settings.seed)) {
      test_total += m;
    }
    TuningRow row;
    row.threshold = threshold;
    row.test_speed = test_total.proxy_speed(settings.cost_ratio);
    for (std::size_t s = 0; s < dev_sizes.size(); ++s) {
      std::vector<double> errors;
      for (const auto& sample : samples[s]) {
        RunMetrics dev_total;
        for (std::size_t idx : sample) dev_total += train_metrics[idx];
        const double dev_speed = dev_total.proxy_speed(settings.cost_ratio);
        errors.push_back(row.test_speed > 0.0
                             ? 100.0 * std::abs(dev_speed - row.test_speed) / row.test_speed
                             : 0.0);
      }
      row.mean_pct_error.push_back(std::accumulate(errors.begin(), errors.end(), 0.0) /
                                   static_cast<double>(errors.size()));
      row.trial_errors.push_back(std::move(errors));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace fuzzyspec::harness
