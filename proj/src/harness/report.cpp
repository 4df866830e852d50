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

#include "fuzzyspec/harness/report.hpp"

#include <fmt/format.h>

#include <fstream>
#include <algorithm>
#include <map>
#include <json.hpp>
#include <tuple>

#include "fuzzyspec/error.hpp"

namespace fuzzyspec::harness {

namespace {

std::string_view block_end_name(BlockEnd end) {
  switch (end) {
    case BlockEnd::kResample: return "resample";
    case BlockEnd::kBonus: return "bonus";
    case BlockEnd::kEndOfGeneration: return "end";
  }
  return "end";
}

std::string kind_label(const AcceptancePolicy& policy) {
  const auto kind = policy_kind(policy);
  return kind ? std::string(to_string(*kind)) : std::string("-");
}

// Shortest round-trip form; identical doubles always print identically.
std::string num(double x) { return fmt::format("{}", x); }

std::string fixed(double x) { return fmt::format("{:.6f}", x); }

using GroupKey = std::tuple<std::string, std::string, double, std::size_t>;

struct Group {
  GroupKey key;
  RunMetrics total;
  std::vector<double> speeds;
};

/// Successful rows grouped by (label, kind, T, L), in first-seen order.
std::vector<Group> group_rows(const SweepResult& result) {
  std::vector<Group> groups;
  std::map<GroupKey, std::size_t> index;
  for (const SweepRow& row : result.rows) {
    if (row.error) continue;
    GroupKey key{policy_label(row.point.policy), kind_label(row.point.policy),
                 row.point.threshold, row.point.candidate_length};
    auto [it, inserted] = index.try_emplace(key, groups.size());
    if (inserted) groups.push_back(Group{key, {}, {}});
    Group& g = groups[it->second];
    g.total += row.metrics;
    g.speeds.push_back(row.proxy_speed);
  }
  return groups;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace

std::string metrics_csv(const SweepResult& result) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const SweepRow& row : result.rows) {
    if (row.error) continue;
    const RunMetrics& m = row.metrics;
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", policy_label(row.point.policy),
                       kind_label(row.point.policy), num(row.point.threshold),
                       row.point.candidate_length, row.point.seed, m.tokens,
                       fixed(m.acceptance_length()), fixed(m.acceptance_pct()),
                       fixed(100.0 * m.pct_from_draft()), m.target_calls, m.draft_calls,
                       fixed(row.proxy_speed));
  }
  return out;
}

std::string summary_json(const SweepResult& result) {
  nlohmann::ordered_json doc;
  std::size_t failed = 0;
  for (const SweepRow& row : result.rows) failed += row.error ? 1 : 0;
  doc["cost_ratio"] = result.cost_ratio;
  doc["rows"] = result.rows.size();
  doc["failed_rows"] = failed;
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (const Group& g : group_rows(result)) {
    const auto& [label, kind, threshold, length] = g.key;
    double mean_speed = 0.0;
    for (double s : g.speeds) mean_speed += s;
    mean_speed /= static_cast<double>(g.speeds.size());
    nlohmann::ordered_json entry;
    entry["policy"] = label;
    entry["kind"] = kind;
    entry["T"] = threshold;
    entry["L"] = length;
    entry["seeds"] = g.speeds.size();
    entry["tokens"] = g.total.tokens;
    entry["blocks"] = g.total.blocks;
    entry["proposed"] = g.total.proposed;
    entry["accepted"] = g.total.accepted;
    entry["target_calls"] = g.total.target_calls;
    entry["draft_calls"] = g.total.draft_calls;
    entry["ALen"] = g.total.acceptance_length();
    entry["accept_pct"] = g.total.acceptance_pct();
    entry["pct_md"] = 100.0 * g.total.pct_from_draft();
    entry["proxy_speed"] = g.total.proxy_speed(result.cost_ratio);
    entry["mean_row_proxy_speed"] = mean_speed;
    groups.push_back(std::move(entry));
  }
  doc["groups"] = std::move(groups);
  return doc.dump(2) + "\n";
}

std::string traces_csv(const SweepResult& result) {
  std::string out =
      "policy,kind,T,L,seed,prompt,block,context_length,proposed,accepted,end\n";
  for (const SweepRow& row : result.rows) {
    if (row.error) continue;
    const std::string label = policy_label(row.point.policy);
    const std::string kind = kind_label(row.point.policy);
    std::size_t block = 0;
    std::size_t last_prompt = static_cast<std::size_t>(-1);
    for (const BlockStat& b : row.blocks) {
      if (b.prompt_index != last_prompt) {
        block = 0;
        last_prompt = b.prompt_index;
      }
      out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", label, kind,
                         num(row.point.threshold), row.point.candidate_length, row.point.seed,
                         b.prompt_index, block++, b.context_length, b.proposed, b.accepted,
                         block_end_name(b.end));
    }
  }
  return out;
}

std::string tradeoff_csv(const SweepResult& result) {
  std::string out = "policy,kind,L,T,accept_pct,pct_md,target_calls_per_token,proxy_speed\n";
  std::vector<Group> groups = group_rows(result);
  std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
    const auto& [la, ka, ta, lena] = a.key;
    const auto& [lb, kb, tb, lenb] = b.key;
    return std::tie(la, ka, lena, ta) < std::tie(lb, kb, lenb, tb);
  });
  for (const Group& g : groups) {
    const auto& [label, kind, threshold, length] = g.key;
    out += fmt::format("{},{},{},{},{},{},{},{}\n", label, kind, length, num(threshold),
                       fixed(g.total.acceptance_pct()), fixed(100.0 * g.total.pct_from_draft()),
                       fixed(g.total.target_calls_per_token()),
                       fixed(g.total.proxy_speed(result.cost_ratio)));
  }
  return out;
}

std::string errors_log(const SweepResult& result) {
  std::string out;
  for (const SweepRow& row : result.rows) {
    if (!row.error) continue;
    out += fmt::format("{} kind={} T={} L={} seed={}: {}\n", policy_label(row.point.policy),
                       kind_label(row.point.policy), num(row.point.threshold),
                       row.point.candidate_length, row.point.seed, *row.error);
  }
  return out;
}

std::vector<std::filesystem::path> emit_reports(const SweepResult& result,
                                                const std::filesystem::path& outdir) {
  if (result.rows.empty()) throw Error(ErrorCode::kInvalidArgument, "sweep result is empty");
  std::vector<std::pair<std::string, std::string>> files{
      {"metrics.csv", metrics_csv(result)},
      {"summary.json", summary_json(result)},
      {"traces.csv", traces_csv(result)},
      {"tradeoff.csv", tradeoff_csv(result)},
  };
  const std::string errors = errors_log(result);
  if (!errors.empty()) files.emplace_back("errors.log", errors);

  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + outdir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  for (const auto& [name, text] : files) {
    written.push_back(outdir / name);
    write_file(written.back(), text);
  }
  return written;
}

std::string tuning_table_text(const TuningTable& table) {
  std::string out = fmt::format("{:>8} {:>12}", "T", "test_speed");
  for (std::size_t n : table.dev_sizes) out += fmt::format(" {:>10}", fmt::format("n={}", n));
  out += "\n";
  for (const TuningRow& row : table.rows) {
    out += fmt::format("{:>8} {:>12.6f}", num(row.threshold), row.test_speed);
    for (double e : row.mean_pct_error) out += fmt::format(" {:>9.3f}%", e);
    out += "\n";
  }
  return out;
}

}  // namespace fuzzyspec::harness
