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

#ifndef FUZZYSPEC_TABLE_MODEL_HPP
#define FUZZYSPEC_TABLE_MODEL_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>

#include "fuzzyspec/model.hpp"

namespace fuzzyspec {

/// Markov-order lookup table over token contexts.
///
/// next_dist uses the longest suffix of the context (at most `order` tokens)
/// that has an entry, falling back to the default distribution. Instances
/// are immutable once built and safe to share across threads.
class TableModel final : public ModelBackend {
 public:
  TableModel(std::size_t vocab_size, std::size_t order, ProbDist default_dist);

  /// Adds or replaces the entry for a context of length <= order.
  void set(std::span<const TokenId> context, ProbDist dist);

  /// Exact-context entry, or nullptr.
  const ProbDist* find(std::span<const TokenId> context) const;

  /// Longest-suffix lookup; returns a reference into the table.
  const ProbDist& lookup(std::span<const TokenId> context) const;

  std::size_t vocab_size() const override { return vocab_size_; }
  std::size_t max_context_length() const override { return order_; }
  ProbDist next_dist(std::span<const TokenId> context) const override {
    return lookup(context);
  }

  std::size_t order() const { return order_; }
  const ProbDist& default_dist() const { return default_dist_; }
  std::size_t entry_count() const { return table_.size(); }

  /// Visits entries in a deterministic (shortest context first, then
  /// lexicographic) order.
  void for_each_entry(
      const std::function<void(const TokenSeq&, const ProbDist&)>& visit) const;

  friend bool operator==(const TableModel& a, const TableModel& b);

 private:
  std::uint64_t encode(std::span<const TokenId> context) const;
  TokenSeq decode_key(std::uint64_t key) const;

  std::size_t vocab_size_;
  std::size_t order_;
  ProbDist default_dist_;
  std::unordered_map<std::uint64_t, ProbDist> table_;
};

/// JSON document:
///   {"vocab_size":V,"order":n,"default":[...],
///    "entries":[{"context":[...],"probs":[...]}, ...]}
void save_table_model(const TableModel& model, const std::filesystem::path& path);
TableModel load_table_model(const std::filesystem::path& path);
std::string table_model_to_json(const TableModel& model);
TableModel table_model_from_json(const std::string& text);

/// Settings for a synthetic target/draft pair with a tunable alignment.
struct SyntheticPairSpec {
  std::uint64_t seed = 0;
  std::size_t vocab_size = 4;
  std::size_t order = 1;
  /// 1 makes the draft identical to the target; 0 makes it pure noise.
  double alignment = 0.5;
  /// Temperature applied to the draft's noise component; < 1 sharpens it.
  double noise_temperature = 1.0;
};

/// Target entries are Dirichlet(1) draws; each draft entry is
/// alignment * target + (1 - alignment) * tempered seeded noise. Every
/// context of length 0..order receives an entry. Deterministic in the spec.
std::pair<TableModel, TableModel> generate_pair(const SyntheticPairSpec& spec);

/// Every context of length exactly `length` over the vocabulary, in
/// lexicographic order.
std::vector<TokenSeq> all_contexts(std::size_t vocab_size, std::size_t length);

}  // namespace fuzzyspec

#endif  // FUZZYSPEC_TABLE_MODEL_HPP
