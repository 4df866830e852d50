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

#ifndef FUZZYSPEC_HARNESS_TUNING_HPP
#define FUZZYSPEC_HARNESS_TUNING_HPP

/** @file
 * Desk-scale versions of the two tuning procedures: choosing a candidate
 * length on a small dev set, matching an FSD threshold to SD's acceptance
 * rate, and measuring how well small dev sets predict test-set speed.
 * Speed is always the call-count proxy, never wall-clock time.
 */

#include <cstdint>
#include <utility>
#include <vector>

#include "fuzzyspec/decoding.hpp"
#include "fuzzyspec/harness/config.hpp"
#include "fuzzyspec/harness/corpus.hpp"

namespace fuzzyspec::harness {

struct DecodeSettings {
  DraftingConfig drafting;
  std::size_t max_new_tokens = 32;
  std::uint64_t seed = 0;
  double cost_ratio = 0.125;
};

struct LengthChoice {
  std::size_t chosen = 0;
  std::vector<std::pair<std::size_t, RunMetrics>> evaluated;
};

/// Length with the fewest target calls per emitted token on `dev`; ties go
/// to the smaller length.
LengthChoice select_candidate_length(const ModelPair& models,
                                     const std::vector<PromptRecord>& dev,
                                     const std::vector<std::size_t>& length_grid,
                                     const AcceptancePolicy& policy,
                                     const DecodeSettings& settings);

struct ThresholdMatch {
  double chosen = 0.0;
  double sd_acceptance_pct = 0.0;
  std::vector<std::pair<double, RunMetrics>> evaluated;
};

/// Grid threshold whose FSD acceptance rate is closest to SD's on `dev`;
/// ties go to the smaller threshold.
ThresholdMatch match_sd_threshold(const ModelPair& models,
                                  const std::vector<PromptRecord>& dev, DivergenceKind kind,
                                  std::size_t candidate_length,
                                  const std::vector<double>& threshold_grid,
                                  const DecodeSettings& settings);

struct TuningRow {
  double threshold = 0.0;
  /// Mean |dev - test| / test proxy-speed error in percent, per dev size.
  std::vector<double> mean_pct_error;
  /// Every individual trial error, per dev size.
  std::vector<std::vector<double>> trial_errors;
  double test_speed = 0.0;
};

struct TuningTable {
  std::vector<std::size_t> dev_sizes;
  std::size_t trials = 0;
  std::vector<TuningRow> rows;
};

/// For each threshold, compares the proxy speed of `trials` seeded dev
/// samples of each size (drawn without replacement from `train`) to the
/// speed on `test`. Dev samples are shared across thresholds.
/// kInsufficientCorpus if `train` is smaller than the largest dev size.
TuningTable tune_threshold_on_dev(const ModelPair& models,
                                  const std::vector<PromptRecord>& train,
                                  const std::vector<PromptRecord>& test, DivergenceKind kind,
                                  const std::vector<double>& thresholds,
                                  std::size_t candidate_length,
                                  const std::vector<std::size_t>& dev_sizes,
                                  std::size_t trials, const DecodeSettings& settings);

}  // namespace fuzzyspec::harness

#endif  // FUZZYSPEC_HARNESS_TUNING_HPP
