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

#include "fuzzyspec/table_model.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "fuzzyspec/error.hpp"

namespace fuzzyspec {

using json = nlohmann::json;

TableModel::TableModel(std::size_t vocab_size, std::size_t order,
                       ProbDist default_dist)
    : vocab_size_(vocab_size), order_(order), default_dist_(std::move(default_dist)) {
  if (vocab_size_ == 0) {
    throw Error(ErrorCode::kInvalidArgument, "vocabulary must be non-empty");
  }
  if (default_dist_.size() != vocab_size_) {
    throw Error(ErrorCode::kVocabMismatch, "default distribution has wrong size");
  }
  // Keys are offset(len) + base-V code; all of them must fit in 64 bits.
  long double span = 1.0L;
  for (std::size_t i = 0; i <= order_; ++i) span *= static_cast<long double>(vocab_size_);
  if (span >= static_cast<long double>(std::numeric_limits<std::uint64_t>::max() / 2)) {
    throw Error(ErrorCode::kInvalidArgument, "vocab_size^order too large for a table");
  }
}

std::uint64_t TableModel::encode(std::span<const TokenId> context) const {
  std::uint64_t offset = 0;
  std::uint64_t power = 1;
  for (std::size_t len = 0; len < context.size(); ++len) {
    offset += power;
    power *= vocab_size_;
  }
  std::uint64_t code = 0;
  for (TokenId t : context) code = code * vocab_size_ + t;
  return offset + code;
}

TokenSeq TableModel::decode_key(std::uint64_t key) const {
  std::size_t len = 0;
  std::uint64_t power = 1;
  while (key >= power) {
    key -= power;
    power *= vocab_size_;
    ++len;
  }
  TokenSeq ctx(len);
  for (std::size_t i = len; i-- > 0;) {
    ctx[i] = static_cast<TokenId>(key % vocab_size_);
    key /= vocab_size_;
  }
  return ctx;
}

void TableModel::set(std::span<const TokenId> context, ProbDist dist) {
  if (context.size() > order_) {
    throw Error(ErrorCode::kInvalidArgument, "context longer than model order");
  }
  for (TokenId t : context) {
    if (t >= vocab_size_) throw Error(ErrorCode::kTokenOutOfRange, "context token");
  }
  if (dist.size() != vocab_size_) {
    throw Error(ErrorCode::kVocabMismatch, "table entry has wrong size");
  }
  table_.insert_or_assign(encode(context), std::move(dist));
}

const ProbDist* TableModel::find(std::span<const TokenId> context) const {
  if (context.size() > order_) return nullptr;
  const auto it = table_.find(encode(context));
  return it == table_.end() ? nullptr : &it->second;
}

const ProbDist& TableModel::lookup(std::span<const TokenId> context) const {
  for (TokenId t : context) {
    if (t >= vocab_size_) {
      throw Error(ErrorCode::kTokenOutOfRange,
                  "token " + std::to_string(t) + " >= vocab_size " +
                      std::to_string(vocab_size_));
    }
  }
  const std::size_t longest = std::min(order_, context.size());
  for (std::size_t len = longest + 1; len-- > 0;) {
    if (const ProbDist* hit = find(context.last(len))) return *hit;
  }
  return default_dist_;
}

void TableModel::for_each_entry(
    const std::function<void(const TokenSeq&, const ProbDist&)>& visit) const {
  std::vector<std::uint64_t> keys;
  keys.reserve(table_.size());
  for (const auto& [key, _] : table_) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  for (std::uint64_t key : keys) visit(decode_key(key), table_.at(key));
}

bool operator==(const TableModel& a, const TableModel& b) {
  return a.vocab_size_ == b.vocab_size_ && a.order_ == b.order_ &&
         a.default_dist_ == b.default_dist_ && a.table_ == b.table_;
}

namespace {

json dist_to_json(const ProbDist& d) {
  json row = json::array();
  for (Eigen::Index i = 0; i < d.probs().size(); ++i) row.push_back(d.probs()[i]);
  return row;
}

ProbDist dist_from_json(const json& row) {
  const auto values = row.get<std::vector<double>>();
  return ProbDist(Eigen::Map<const Eigen::VectorXd>(
      values.data(), static_cast<Eigen::Index>(values.size())));
}

}  // namespace

std::string table_model_to_json(const TableModel& model) {
  json doc;
  doc["vocab_size"] = model.vocab_size();
  doc["order"] = model.order();
  doc["default"] = dist_to_json(model.default_dist());
  json entries = json::array();
  model.for_each_entry([&](const TokenSeq& ctx, const ProbDist& d) {
    entries.push_back({{"context", ctx}, {"probs", dist_to_json(d)}});
  });
  doc["entries"] = std::move(entries);
  return doc.dump();
}

TableModel table_model_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    TableModel model(doc.at("vocab_size").get<std::size_t>(),
                     doc.at("order").get<std::size_t>(),
                     dist_from_json(doc.at("default")));
    for (const auto& entry : doc.at("entries")) {
      const auto ctx = entry.at("context").get<TokenSeq>();
      model.set(ctx, dist_from_json(entry.at("probs")));
    }
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("table model: ") + e.what());
  }
}

void save_table_model(const TableModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << table_model_to_json(model) << '\n';
}

TableModel load_table_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return table_model_from_json(buffer.str());
}

std::vector<TokenSeq> all_contexts(std::size_t vocab_size, std::size_t length) {
  std::vector<TokenSeq> out;
  TokenSeq current(length, 0);
  while (true) {
    out.push_back(current);
    std::size_t i = length;
    while (i > 0) {
      --i;
      if (++current[i] < vocab_size) break;
      current[i] = 0;
      if (i == 0) return out;
    }
    if (length == 0) return out;
  }
}

namespace {

Eigen::VectorXd dirichlet_one(std::size_t vocab_size, Rng& rng) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(vocab_size));
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    // Exp(1) variates normalised give a flat Dirichlet draw. 1 - u avoids log(0).
    w[i] = -std::log1p(-rng.uniform()) + 1e-12;
  }
  return w / w.sum();
}

}  // namespace

std::pair<TableModel, TableModel> generate_pair(const SyntheticPairSpec& spec) {
  if (!(spec.alignment >= 0.0 && spec.alignment <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alignment must lie in [0, 1]");
  }
  if (spec.vocab_size == 0) {
    throw Error(ErrorCode::kInvalidArgument, "vocabulary must be non-empty");
  }
  Rng target_rng = Rng(spec.seed).split(1);
  Rng noise_rng = Rng(spec.seed).split(2);

  const ProbDist uniform = ProbDist::uniform(spec.vocab_size);
  TableModel target(spec.vocab_size, spec.order, uniform);
  TableModel draft(spec.vocab_size, spec.order, uniform);
  for (std::size_t len = 0; len <= spec.order; ++len) {
    for (const TokenSeq& ctx : all_contexts(spec.vocab_size, len)) {
      ProbDist t = normalize(dirichlet_one(spec.vocab_size, target_rng));
      const ProbDist noise = apply_temperature(
          normalize(dirichlet_one(spec.vocab_size, noise_rng)), spec.noise_temperature);
      if (spec.alignment == 1.0) {
        draft.set(ctx, t);
      } else {
        draft.set(ctx, normalize(Eigen::VectorXd(spec.alignment * t.probs() +
                                                 (1.0 - spec.alignment) * noise.probs())));
      }
      target.set(ctx, std::move(t));
    }
  }
  return {std::move(target), std::move(draft)};
}

}  // namespace fuzzyspec
