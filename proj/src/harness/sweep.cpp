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

#include "fuzzyspec/harness/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "fuzzyspec/error.hpp"

namespace fuzzyspec::harness {

std::vector<SweepPoint> expand_grid(const ExperimentConfig& config) {
  std::vector<SweepPoint> points;
  for (const auto& policy : config.policies) {
    for (double threshold : config.thresholds) {
      for (std::size_t length : config.candidate_lengths) {
        for (std::uint64_t seed : config.seeds) {
          points.push_back(SweepPoint{with_threshold(policy, threshold), threshold, length, seed});
        }
      }
    }
  }
  return points;
}

namespace {

DecodeResult decode_prompt(const ModelPair& models, const PromptRecord& prompt,
                           const AcceptancePolicy& policy, const DraftingConfig& drafting,
                           std::size_t max_new_tokens, std::uint64_t seed) {
  Rng rng = Rng(seed).split(prompt_stream_id(prompt.id));
  return decode(*models.target, *models.draft, prompt.tokens, policy, drafting,
                max_new_tokens, rng);
}

}  // namespace

std::vector<RunMetrics> per_prompt_metrics(const ModelPair& models,
                                           const std::vector<PromptRecord>& prompts,
                                           const AcceptancePolicy& policy,
                                           const DraftingConfig& drafting,
                                           std::size_t max_new_tokens, std::uint64_t seed) {
  std::vector<RunMetrics> out;
  out.reserve(prompts.size());
  for (const auto& prompt : prompts) {
    out.push_back(compute_metrics(
        decode_prompt(models, prompt, policy, drafting, max_new_tokens, seed).trace));
  }
  return out;
}

SweepRow run_point(const ModelPair& models, const std::vector<PromptRecord>& prompts,
                   const SweepPoint& point, const DraftingConfig& drafting,
                   std::size_t max_new_tokens, double cost_ratio) {
  SweepRow row;
  row.point = point;
  DraftingConfig cfg = drafting;
  cfg.candidate_length = point.candidate_length;
  try {
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      const DecodeResult result =
          decode_prompt(models, prompts[i], point.policy, cfg, max_new_tokens, point.seed);
      row.metrics += compute_metrics(result.trace);
      for (const BlockRecord& block : result.trace.blocks) {
        row.blocks.push_back(BlockStat{i, block.context_length, block.candidates.size(),
                                       block.accepted_count(), block.end});
      }
    }
  } catch (const std::exception& e) {
    row.error = e.what();
    row.metrics = RunMetrics{};
    row.blocks.clear();
  }
  row.proxy_speed = row.metrics.proxy_speed(cost_ratio);
  return row;
}

SweepResult run_sweep(const ExperimentConfig& config, const Corpus& corpus,
                      const ModelProvider& models,
                      const std::function<void(const SweepRow&)>& on_row) {
  corpus.check_vocab(models.vocab_size());
  const std::vector<PromptRecord> prompts = corpus.subset(config.split);
  const std::vector<SweepPoint> points = expand_grid(config);

  SweepResult result;
  result.cost_ratio = config.cost_ratio;
  result.rows.resize(points.size());

  auto compute = [&](std::size_t i) {
    ModelPair pair;
    try {
      pair = models.acquire();
    } catch (const std::exception& e) {
      SweepRow row;
      row.point = points[i];
      row.error = e.what();
      return row;
    }
    return run_point(pair, prompts, points[i], config.drafting, config.max_new_tokens,
                     config.cost_ratio);
  };

  const std::size_t workers = std::min(config.workers, std::max<std::size_t>(points.size(), 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      result.rows[i] = compute(i);
      if (on_row) on_row(result.rows[i]);
    }
    return result;
  }

  std::atomic<std::size_t> next{0};
  std::vector<char> done(points.size(), 0);
  std::mutex mutex;
  std::condition_variable ready;
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < points.size(); i = next++) {
        SweepRow row = compute(i);
        std::lock_guard lock(mutex);
        result.rows[i] = std::move(row);
        done[i] = 1;
        ready.notify_all();
      }
    });
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::unique_lock lock(mutex);
    ready.wait(lock, [&] { return done[i] != 0; });
    lock.unlock();
    if (on_row) on_row(result.rows[i]);
  }
  pool.clear();
  return result;
}

}  // namespace fuzzyspec::harness
