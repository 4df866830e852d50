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

#ifndef FUZZYSPEC_HARNESS_CONFIG_HPP
#define FUZZYSPEC_HARNESS_CONFIG_HPP

/** @file
 * Experiment configuration: a single JSON document whose keys mirror
 * ExperimentConfig. Unknown keys are rejected. Documented defaults:
 * seeds [0, 1, 2], split "test", cost_ratio 0.125, workers 1, drafting
 * greedy with sampled (temperature 1) rejection and bonus tokens, fixed
 * schedule; tuning dev_size 8, length grid [5, 10, 15, 20], length policy
 * SD, kind JS, dev sizes [4, 8, 16, 32], 10 trials.
 */

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fuzzyspec/decoding.hpp"
#include "fuzzyspec/harness/corpus.hpp"
#include "fuzzyspec/remote.hpp"
#include "fuzzyspec/table_model.hpp"

namespace fuzzyspec::harness {

struct SyntheticModels {
  SyntheticPairSpec spec;
};

struct TableFiles {
  std::filesystem::path target;
  std::filesystem::path draft;
};

struct RemoteEndpoints {
  RemoteModelConfig target;
  RemoteModelConfig draft;
};

using ModelSource = std::variant<SyntheticModels, TableFiles, RemoteEndpoints>;

using CorpusSource = std::variant<std::filesystem::path, SyntheticCorpusSpec>;

struct TuningConfig {
  std::size_t dev_size = 8;
  std::vector<std::size_t> length_grid{5, 10, 15, 20};
  AcceptancePolicy length_policy = policy::SD{};
  DivergenceKind kind = DivergenceKind::kJS;
  std::vector<std::size_t> dev_sizes{4, 8, 16, 32};
  std::size_t trials = 10;
};

struct ExperimentConfig {
  ModelSource models = SyntheticModels{};
  std::vector<AcceptancePolicy> policies;
  std::vector<double> thresholds;
  std::vector<std::size_t> candidate_lengths;
  DraftingConfig drafting;
  std::size_t max_new_tokens = 32;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  CorpusSource corpus = SyntheticCorpusSpec{};
  Split split = Split::kTest;
  std::filesystem::path output_dir = "out";
  double cost_ratio = 0.125;
  std::size_t workers = 1;
  TuningConfig tuning;
};

/// Relative paths inside the document resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Grids non-empty, seeds distinct, parameters in range.
void validate(const ExperimentConfig& config);

/// "SD", "FSD:JS", "rFSD:KL", "Random:0.3", "TargetOnly", "DraftOnly".
/// Thresholds come from the sweep grid, not the string.
AcceptancePolicy parse_policy(std::string_view text);

/// Column label used in reports: the policy name, with the rate appended
/// for Random ("Random@0.3").
std::string policy_label(const AcceptancePolicy& policy);

Corpus resolve_corpus(const CorpusSource& source);

struct ModelPair {
  std::shared_ptr<const ModelBackend> target;
  std::shared_ptr<const ModelBackend> draft;
};

/// Hands out model pairs for decode sessions. Synthetic and table models
/// are built once and shared; remote endpoints get a fresh session pair per
/// acquire() so concurrent rows never share a connection.
class ModelProvider {
 public:
  explicit ModelProvider(const ModelSource& source);

  ModelPair acquire() const;
  std::size_t vocab_size() const { return vocab_size_; }

 private:
  ModelSource source_;
  ModelPair shared_;
  std::size_t vocab_size_ = 0;
};

}  // namespace fuzzyspec::harness

#endif  // FUZZYSPEC_HARNESS_CONFIG_HPP
