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

#ifndef FUZZYSPEC_HARNESS_VERIFY_HPP
#define FUZZYSPEC_HARNESS_VERIFY_HPP

/** @file
 * Oracle suites run by `fuzzyspec verify`. Each suite draws its random
 * instances from a single seed and emits one record per check.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fuzzyspec/prob.hpp"
#include "fuzzyspec/rng.hpp"
#include "fuzzyspec/table_model.hpp"

namespace fuzzyspec::harness {

enum class VerifySuite { kSdEquivalence, kFsdBound, kRandomBaseline, kRfsdReduction };

std::string_view to_string(VerifySuite suite);
std::optional<VerifySuite> parse_verify_suite(std::string_view name);

struct VerifyRecord {
  std::string suite;
  std::string check;
  std::size_t instance = 0;
  bool passed = true;
  /// Informational only: a flagged record never fails the suite.
  bool flagged = false;
  std::vector<std::pair<std::string, double>> values;
  std::string note;
};

struct SuiteResult {
  VerifySuite suite = VerifySuite::kSdEquivalence;
  std::vector<VerifyRecord> records;
  bool passed = true;
};

/// A random small target/draft pair with a prompt and decode sizes.
struct OracleInstance {
  SyntheticPairSpec spec;
  TableModel target;
  TableModel draft;
  TokenSeq prompt;
  std::size_t length = 1;
  std::size_t block_length = 1;
};

struct InstanceRanges {
  std::size_t min_vocab = 2;
  std::size_t max_vocab = 4;
  std::size_t max_order = 2;
  double min_alignment = 0.0;
  double max_alignment = 1.0;
  std::size_t min_length = 1;
  std::size_t max_length = 4;
  std::size_t max_block_length = 3;
};

OracleInstance random_instance(Rng& rng, const InstanceRanges& ranges);

/// TV(SD process, target) <= 1e-12 on `instances` random instances.
SuiteResult run_sd_equivalence(std::uint64_t seed, std::size_t instances = 50);
/// KL and TV bounds asserted, JS bound reported and flagged.
SuiteResult run_fsd_bound(std::uint64_t seed, std::size_t instances = 100);
/// FSD beats a random policy at matched draft use on >= 95% of instances.
SuiteResult run_random_baseline(std::uint64_t seed, std::size_t instances = 100);
/// rFSD at T = 0 reproduces SD bit for bit under shared seeds.
SuiteResult run_rfsd_reduction(std::uint64_t seed, std::size_t instances = 100);

SuiteResult run_suite(VerifySuite suite, std::uint64_t seed);

/// One JSON object per record, newline-terminated.
std::string to_jsonl(const std::vector<VerifyRecord>& records);

}  // namespace fuzzyspec::harness

#endif  // FUZZYSPEC_HARNESS_VERIFY_HPP
