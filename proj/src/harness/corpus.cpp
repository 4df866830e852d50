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

#include "fuzzyspec/harness/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fuzzyspec/error.hpp"
#include "fuzzyspec/rng.hpp"

namespace fuzzyspec::harness {

using json = nlohmann::json;

std::string_view to_string(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

std::vector<PromptRecord> Corpus::subset(Split split) const {
  std::vector<PromptRecord> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

void Corpus::check_vocab(std::size_t vocab_size) const {
  for (const auto& r : records) {
    for (TokenId t : r.tokens) {
      if (t >= vocab_size) {
        throw Error(ErrorCode::kTokenOutOfRange,
                    "record '" + r.id + "' has token " + std::to_string(t) +
                        " >= vocab_size " + std::to_string(vocab_size));
      }
    }
  }
}

namespace {

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kParseError, "line " + std::to_string(line) + ": " + what);
}

}  // namespace

Corpus parse_corpus(std::string_view text) {
  Corpus corpus;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      parse_error(number, e.what());
    }
    if (!obj.is_object()) parse_error(number, "expected an object");
    for (const auto& [key, _] : obj.items()) {
      if (key != "id" && key != "tokens" && key != "split") {
        parse_error(number, "unknown key '" + key + "'");
      }
    }
    PromptRecord rec;
    if (!obj.contains("id") || !obj["id"].is_string()) parse_error(number, "missing string id");
    rec.id = obj["id"].get<std::string>();
    if (!obj.contains("tokens") || !obj["tokens"].is_array() || obj["tokens"].empty()) {
      parse_error(number, "tokens must be a non-empty array");
    }
    for (const auto& t : obj["tokens"]) {
      if (!t.is_number_unsigned()) parse_error(number, "tokens must be non-negative integers");
      rec.tokens.push_back(t.get<TokenId>());
    }
    const std::string split = obj.value("split", std::string("test"));
    if (split == "train") {
      rec.split = Split::kTrain;
    } else if (split == "test") {
      rec.split = Split::kTest;
    } else {
      parse_error(number, "unknown split '" + split + "'");
    }
    if (!seen.insert(rec.id).second) parse_error(number, "duplicate id '" + rec.id + "'");
    corpus.records.push_back(std::move(rec));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read corpus " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_corpus(buffer.str());
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& r : corpus.records) {
    json obj;
    obj["id"] = r.id;
    obj["tokens"] = r.tokens;
    obj["split"] = std::string(to_string(r.split));
    out += obj.dump();
    out += '\n';
  }
  return out;
}

Corpus generate_corpus(const SyntheticCorpusSpec& spec) {
  if (spec.vocab_size == 0 || spec.min_length == 0 || spec.min_length > spec.max_length) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic corpus needs 1 <= min <= max length");
  }
  Rng rng(spec.seed, 0xc0de);
  Corpus corpus;
  const auto train_count =
      static_cast<std::size_t>(spec.train_fraction * static_cast<double>(spec.count) + 0.5);
  for (std::size_t i = 0; i < spec.count; ++i) {
    PromptRecord rec;
    rec.id = "p" + std::to_string(i);
    const std::size_t len =
        spec.min_length + rng.next_u64() % (spec.max_length - spec.min_length + 1);
    for (std::size_t j = 0; j < len; ++j) {
      rec.tokens.push_back(static_cast<TokenId>(rng.next_u64() % spec.vocab_size));
    }
    rec.split = i < train_count ? Split::kTrain : Split::kTest;
    corpus.records.push_back(std::move(rec));
  }
  return corpus;
}

std::uint64_t prompt_stream_id(std::string_view id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace fuzzyspec::harness
