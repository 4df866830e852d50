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

#include "fuzzyspec/harness/verify.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "fuzzyspec/decoding.hpp"
#include "fuzzyspec/oracle.hpp"

namespace fuzzyspec::harness {

namespace {

constexpr double kSequenceTolerance = 1e-12;
constexpr double kDominanceShare = 0.95;

std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.next_u64() % (hi - lo + 1));
}

/// Largest Div(pT, pD) over every context the tables store.
double max_context_divergence(const OracleInstance& inst, DivergenceKind kind) {
  double worst = 0.0;
  for (std::size_t len = 0; len <= inst.spec.order; ++len) {
    for (const TokenSeq& ctx : all_contexts(inst.spec.vocab_size, len)) {
      worst = std::max(worst, divergence(kind, inst.target.next_dist(ctx),
                                         inst.draft.next_dist(ctx)));
    }
  }
  return worst;
}

double median_context_divergence(const OracleInstance& inst, DivergenceKind kind) {
  std::vector<double> values;
  for (std::size_t len = 0; len <= inst.spec.order; ++len) {
    for (const TokenSeq& ctx : all_contexts(inst.spec.vocab_size, len)) {
      values.push_back(
          divergence(kind, inst.target.next_dist(ctx), inst.draft.next_dist(ctx)));
    }
  }
  std::sort(values.begin(), values.end());
  return values[values.size() / 2];
}

SuiteResult finish(VerifySuite suite, std::vector<VerifyRecord> records) {
  SuiteResult result{suite, std::move(records), true};
  for (const VerifyRecord& r : result.records) result.passed = result.passed && r.passed;
  return result;
}

}  // namespace

std::string_view to_string(VerifySuite suite) {
  switch (suite) {
    case VerifySuite::kSdEquivalence: return "sd-equivalence";
    case VerifySuite::kFsdBound: return "fsd-bound";
    case VerifySuite::kRandomBaseline: return "random-baseline";
    case VerifySuite::kRfsdReduction: return "rfsd-reduction";
  }
  return "unknown";
}

std::optional<VerifySuite> parse_verify_suite(std::string_view name) {
  for (VerifySuite s : {VerifySuite::kSdEquivalence, VerifySuite::kFsdBound,
                        VerifySuite::kRandomBaseline, VerifySuite::kRfsdReduction}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

OracleInstance random_instance(Rng& rng, const InstanceRanges& ranges) {
  SyntheticPairSpec spec;
  spec.seed = rng.next_u64();
  spec.vocab_size = uniform_index(rng, ranges.min_vocab, ranges.max_vocab);
  spec.order = uniform_index(rng, 0, ranges.max_order);
  spec.alignment =
      ranges.min_alignment + (ranges.max_alignment - ranges.min_alignment) * rng.uniform();
  auto [target, draft] = generate_pair(spec);
  TokenSeq prompt(uniform_index(rng, 1, 2));
  for (TokenId& t : prompt) t = static_cast<TokenId>(uniform_index(rng, 0, spec.vocab_size - 1));
  const std::size_t length = uniform_index(rng, ranges.min_length, ranges.max_length);
  const std::size_t block = uniform_index(rng, 1, ranges.max_block_length);
  return OracleInstance{spec, std::move(target), std::move(draft), std::move(prompt), length,
                        block};
}

SuiteResult run_sd_equivalence(std::uint64_t seed, std::size_t instances) {
  Rng rng(seed, 0x5d);
  std::vector<VerifyRecord> records;
  for (std::size_t i = 0; i < instances; ++i) {
    const OracleInstance inst = random_instance(rng, {});
    const SequenceDist sd = enumerate_sd_dist(inst.target, inst.draft, inst.prompt,
                                              inst.length, inst.block_length);
    const SequenceDist ref = enumerate_target_dist(inst.target, inst.prompt, inst.length);
    const double gap = sequence_divergence(DivergenceKind::kTV, ref, sd);
    records.push_back({"sd-equivalence", "tv", i, gap <= kSequenceTolerance, false,
                       {{"tv", gap},
                        {"vocab", static_cast<double>(inst.spec.vocab_size)},
                        {"N", static_cast<double>(inst.length)},
                        {"L", static_cast<double>(inst.block_length)}},
                       ""});
  }
  return finish(VerifySuite::kSdEquivalence, std::move(records));
}

SuiteResult run_fsd_bound(std::uint64_t seed, std::size_t instances) {
  Rng rng(seed, 0xf5d);
  std::vector<VerifyRecord> records;
  for (std::size_t i = 0; i < instances; ++i) {
    const OracleInstance inst = random_instance(rng, {});
    for (DivergenceKind kind : {DivergenceKind::kKL, DivergenceKind::kTV, DivergenceKind::kJS}) {
      const double threshold = 1.2 * max_context_divergence(inst, kind) * rng.uniform();
      const FuzzyProcess process{kind, threshold, inst.block_length, true};
      const BoundReport r =
          check_bound(inst.target, inst.draft, inst.prompt, inst.length, process);
      const bool holds = r.bound_holds() && r.steps_within_bound();
      VerifyRecord rec{"fsd-bound", std::string(to_string(kind)), i, true, false,
                       {{"T", threshold},
                        {"exact", r.exact},
                        {"bound", r.bound},
                        {"slack", r.slack},
                        {"p_use", r.p_use},
                        {"step_terms_sum", r.step_terms_sum}},
                       ""};
      if (kind == DivergenceKind::kJS) {
        rec.flagged = !holds;
        if (!holds) rec.note = "JS bound violated (informational)";
      } else {
        rec.passed = holds;
      }
      records.push_back(std::move(rec));
    }
  }
  return finish(VerifySuite::kFsdBound, std::move(records));
}

SuiteResult run_random_baseline(std::uint64_t seed, std::size_t instances) {
  Rng rng(seed, 0xba5e);
  InstanceRanges ranges;
  ranges.max_alignment = 0.5;
  std::vector<VerifyRecord> records;
  std::size_t dominated = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    const OracleInstance inst = random_instance(rng, ranges);
    const double threshold = median_context_divergence(inst, DivergenceKind::kJS);
    Rng masks = rng.split(i);
    const RandomBaselineReport r =
        compare_random_baseline(inst.target, inst.draft, inst.prompt, inst.length,
                                DivergenceKind::kJS, threshold, 1000, masks);
    const bool ok = r.fsd_dominates();
    dominated += ok ? 1 : 0;
    records.push_back({"random-baseline", "dominance", i, true, !ok,
                       {{"T", threshold},
                        {"fsd", r.fsd_divergence},
                        {"random", r.random_divergence},
                        {"draft_fraction", r.draft_fraction}},
                       ok ? "" : "random policy closer to target on this instance"});
  }
  const double share = instances == 0 ? 1.0 : static_cast<double>(dominated) / instances;
  records.push_back({"random-baseline", "dominance-share", instances,
                     share >= kDominanceShare, false,
                     {{"dominated", static_cast<double>(dominated)},
                      {"instances", static_cast<double>(instances)},
                      {"share", share}},
                     ""});
  return finish(VerifySuite::kRandomBaseline, std::move(records));
}

SuiteResult run_rfsd_reduction(std::uint64_t seed, std::size_t instances) {
  Rng rng(seed, 0x7f5d);
  std::vector<VerifyRecord> records;
  DraftingConfig cfg;
  cfg.draft_mode = Sampled{1.0};
  for (std::size_t i = 0; i < instances; ++i) {
    const OracleInstance inst = random_instance(rng, {});
    cfg.candidate_length = inst.block_length;
    const auto kind = static_cast<DivergenceKind>(i % 3);
    const std::size_t max_new = 4 * inst.length;
    Rng a = rng.split(i);
    Rng b = a;
    const DecodeResult sd =
        decode(inst.target, inst.draft, inst.prompt, policy::SD{}, cfg, max_new, a);
    const DecodeResult rf =
        decode(inst.target, inst.draft, inst.prompt, policy::RFSD{kind, 0.0}, cfg, max_new, b);
    const bool same = sd.tokens == rf.tokens &&
                      compute_metrics(sd.trace) == compute_metrics(rf.trace) &&
                      a.draws() == b.draws();
    records.push_back({"rfsd-reduction", std::string(to_string(kind)), i, same, false,
                       {{"tokens", static_cast<double>(sd.tokens.size())},
                        {"draws", static_cast<double>(a.draws())}},
                       same ? "" : "rFSD(T=0) diverged from SD"});
  }
  return finish(VerifySuite::kRfsdReduction, std::move(records));
}

SuiteResult run_suite(VerifySuite suite, std::uint64_t seed) {
  switch (suite) {
    case VerifySuite::kSdEquivalence: return run_sd_equivalence(seed);
    case VerifySuite::kFsdBound: return run_fsd_bound(seed);
    case VerifySuite::kRandomBaseline: return run_random_baseline(seed);
    case VerifySuite::kRfsdReduction: return run_rfsd_reduction(seed);
  }
  return {};
}

std::string to_jsonl(const std::vector<VerifyRecord>& records) {
  std::string out;
  for (const VerifyRecord& r : records) {
    nlohmann::ordered_json line;
    line["suite"] = r.suite;
    line["check"] = r.check;
    line["instance"] = r.instance;
    line["passed"] = r.passed;
    line["flagged"] = r.flagged;
    nlohmann::ordered_json values = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.values) {
      if (std::isfinite(v)) {
        values[k] = v;
      } else {
        values[k] = nullptr;
      }
    }
    line["values"] = std::move(values);
    if (!r.note.empty()) line["note"] = r.note;
    out += line.dump() + "\n";
  }
  return out;
}

}  // namespace fuzzyspec::harness
