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

#ifndef FUZZYSPEC_HARNESS_CORPUS_HPP
#define FUZZYSPEC_HARNESS_CORPUS_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fuzzyspec/prob.hpp"

namespace fuzzyspec::harness {

enum class Split { kTrain, kTest };

std::string_view to_string(Split split);

struct PromptRecord {
  std::string id;
  TokenSeq tokens;
  Split split = Split::kTest;
};

/// Prompt records in file order. Ids are unique; token ranges are checked
/// against a vocabulary only when a run references the corpus.
struct Corpus {
  std::vector<PromptRecord> records;

  std::vector<PromptRecord> subset(Split split) const;
  /// kTokenOutOfRange naming the first offending record.
  void check_vocab(std::size_t vocab_size) const;
};

/// One JSON object per line: {"id":"q1","tokens":[3,1,4],"split":"test"}.
/// Blank lines are skipped. Malformed lines, empty token lists, unknown
/// splits and duplicate ids raise kParseError with the 1-based line number.
Corpus parse_corpus(std::string_view text);
Corpus load_corpus(const std::filesystem::path& path);
std::string corpus_to_jsonl(const Corpus& corpus);

struct SyntheticCorpusSpec {
  std::uint64_t seed = 0;
  std::size_t count = 64;
  std::size_t vocab_size = 8;
  std::size_t min_length = 1;
  std::size_t max_length = 4;
  /// Fraction of records labelled train; the rest are test.
  double train_fraction = 0.5;
};

/// Uniform random prompts with ids "p0", "p1", ...
Corpus generate_corpus(const SyntheticCorpusSpec& spec);

/// Stable 64-bit hash of a prompt id, used to key per-prompt RNG streams.
std::uint64_t prompt_stream_id(std::string_view id);

}  // namespace fuzzyspec::harness

#endif  // FUZZYSPEC_HARNESS_CORPUS_HPP
