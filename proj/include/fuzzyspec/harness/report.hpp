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

#ifndef FUZZYSPEC_HARNESS_REPORT_HPP
#define FUZZYSPEC_HARNESS_REPORT_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "fuzzyspec/harness/sweep.hpp"
#include "fuzzyspec/harness/tuning.hpp"

namespace fuzzyspec::harness {

inline constexpr const char* kMetricsHeader =
    "policy,kind,T,L,seed,tokens,ALen,accept_pct,pct_md,target_calls,draft_calls,proxy_speed";

/// One line per successful row, in row order.
std::string metrics_csv(const SweepResult& result);
/// Aggregates over seeds per (policy, kind, T, L).
std::string summary_json(const SweepResult& result);
/// Per-block summaries: row,prompt,block,context_length,proposed,accepted,end.
std::string traces_csv(const SweepResult& result);
/// Proxy speed and acceptance against T, averaged over seeds.
std::string tradeoff_csv(const SweepResult& result);
/// One line per failed row; empty when nothing failed.
std::string errors_log(const SweepResult& result);

/// Writes metrics.csv, summary.json, traces.csv, tradeoff.csv and, if any
/// row failed, errors.log into `outdir`. kInvalidArgument for an empty
/// result (nothing is written); kIo on filesystem failure. Output is a pure
/// function of `result`.
std::vector<std::filesystem::path> emit_reports(const SweepResult& result,
                                                const std::filesystem::path& outdir);

/// Table-3-shaped text: one line per threshold, one column per dev size.
std::string tuning_table_text(const TuningTable& table);

}  // namespace fuzzyspec::harness

#endif  // FUZZYSPEC_HARNESS_REPORT_HPP
