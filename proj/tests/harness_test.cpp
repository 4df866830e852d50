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

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fuzzyspec/error.hpp"
#include "fuzzyspec/harness/config.hpp"
#include "fuzzyspec/harness/corpus.hpp"
#include "fuzzyspec/harness/report.hpp"
#include "fuzzyspec/harness/sweep.hpp"
#include "fuzzyspec/harness/tuning.hpp"
#include "fuzzyspec/harness/verify.hpp"

namespace fuzzyspec::harness {
namespace {

namespace fs = std::filesystem;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::kIo;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fuzzyspec_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ModelPair pair_of(const SyntheticPairSpec& spec) {
  auto [t, d] = generate_pair(spec);
  return ModelPair{std::make_shared<TableModel>(std::move(t)),
                   std::make_shared<TableModel>(std::move(d))};
}

// ---------------------------------------------------------------------------
// Corpus

TEST(Corpus, EmptyFileIsEmptyCorpus) { EXPECT_TRUE(parse_corpus("").records.empty()); }

TEST(Corpus, ParsesRecords) {
  const Corpus c = parse_corpus(
      "{\"id\":\"q1\",\"tokens\":[3,1,4],\"split\":\"test\"}\n\n"
      "{\"id\":\"q2\",\"tokens\":[1],\"split\":\"train\"}\n");
  ASSERT_EQ(c.records.size(), 2u);
  EXPECT_EQ(c.records[0].tokens, (TokenSeq{3, 1, 4}));
  EXPECT_EQ(c.records[1].split, Split::kTrain);
  EXPECT_EQ(c.subset(Split::kTest).size(), 1u);
}

TEST(Corpus, DuplicateIdIsParseError) {
  try {
    parse_corpus("{\"id\":\"a\",\"tokens\":[1]}\n{\"id\":\"a\",\"tokens\":[2]}\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(e.message().find("line 2"), std::string::npos) << e.message();
  }
}

TEST(Corpus, MalformedLines) {
  for (const char* text : {"{", "{\"id\":\"a\",\"tokens\":[]}", "{\"id\":\"a\",\"tokens\":[1],\"x\":1}",
                           "{\"id\":\"a\",\"tokens\":[1],\"split\":\"dev\"}",
                           "{\"id\":\"a\",\"tokens\":[-1]}"}) {
    EXPECT_EQ(code_of([&] { parse_corpus(text); }), ErrorCode::kParseError) << text;
  }
}

TEST(Corpus, TokenOutOfRangeOnUse) {
  const Corpus c = parse_corpus("{\"id\":\"a\",\"tokens\":[1, 9]}\n");
  EXPECT_NO_THROW(c.check_vocab(10));
  EXPECT_EQ(code_of([&] { c.check_vocab(8); }), ErrorCode::kTokenOutOfRange);
}

TEST(Corpus, JsonlRoundTrip) {
  const Corpus c = generate_corpus({.seed = 3, .count = 20});
  const Corpus back = parse_corpus(corpus_to_jsonl(c));
  ASSERT_EQ(back.records.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(back.records[i].id, c.records[i].id);
    EXPECT_EQ(back.records[i].tokens, c.records[i].tokens);
    EXPECT_EQ(back.records[i].split, c.records[i].split);
  }
  EXPECT_EQ(c.subset(Split::kTrain).size(), 10u);
}

// ---------------------------------------------------------------------------
// Config

TEST(Config, DefaultsAndUnknownKeys) {
  const ExperimentConfig c = parse_config("{}", ".");
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(c.cost_ratio, 0.125);
  EXPECT_EQ(c.policies.size(), 1u);
  EXPECT_EQ(code_of([] { parse_config(R"({"sedes":[1]})", "."); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_config(R"({"drafting":{"mode":"greedy"}})", "."); }),
            ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_config(R"({"models":{"synthetic":{"alpha":1}}})", "."); }),
            ErrorCode::kParseError);
}

TEST(Config, Validation) {
  ExperimentConfig c = parse_config("{}", ".");
  c.seeds = {1, 1};
  EXPECT_THROW(validate(c), Error);
  c.seeds = {1};
  c.thresholds.clear();
  EXPECT_THROW(validate(c), Error);
}

TEST(Config, PolicyStrings) {
  EXPECT_EQ(policy_name(parse_policy("SD")), "SD");
  EXPECT_EQ(policy_kind(parse_policy("FSD:JS")), DivergenceKind::kJS);
  EXPECT_EQ(policy_kind(parse_policy("rFSD:KL")), DivergenceKind::kKL);
  EXPECT_EQ(policy_parameter(parse_policy("Random:0.3")), 0.3);
  EXPECT_EQ(policy_label(parse_policy("Random:0.3")), "Random@0.3");
  EXPECT_EQ(policy_name(parse_policy("DraftOnly")), "DraftOnly");
  EXPECT_EQ(policy_kind(parse_policy("FSD")), DivergenceKind::kJS);
  EXPECT_THROW(parse_policy("FSD:L1"), Error);
  EXPECT_THROW(parse_policy("Random:2"), Error);
  EXPECT_THROW(parse_policy("Beam"), Error);
}

TEST(Config, FullDocument) {
  const ExperimentConfig c = parse_config(R"({
    "models": {"synthetic": {"seed": 1, "vocab_size": 6, "order": 2, "alignment": 0.7}},
    "policies": ["SD", "FSD:TV"],
    "thresholds": [0.1, 0.2],
    "candidate_lengths": [3, 4],
    "drafting": {"draft_mode": "sampled", "draft_temperature": 0.7, "schedule": "dynamic",
                 "stop_token": 2, "bonus_token": false},
    "max_new_tokens": 9,
    "seeds": [5],
    "corpus": "prompts.jsonl",
    "split": "train",
    "workers": 2
  })", "/data");
  EXPECT_EQ(std::get<SyntheticModels>(c.models).spec.vocab_size, 6u);
  EXPECT_EQ(std::get<Sampled>(c.drafting.draft_mode).temperature, 0.7);
  EXPECT_TRUE(std::holds_alternative<DynamicLength>(c.drafting.schedule));
  EXPECT_EQ(c.drafting.stop_token, TokenId{2});
  EXPECT_FALSE(c.drafting.bonus_token);
  EXPECT_EQ(std::get<fs::path>(c.corpus), fs::path("/data/prompts.jsonl"));
  EXPECT_EQ(c.split, Split::kTrain);
  EXPECT_EQ(expand_grid(c).size(), 2u * 2u * 2u * 1u);
}

// ---------------------------------------------------------------------------
// Sweep

ExperimentConfig small_config() {
  ExperimentConfig c = parse_config(R"({
    "models": {"synthetic": {"seed": 2, "vocab_size": 5, "order": 1, "alignment": 0.5}},
    "policies": ["SD"],
    "thresholds": [0],
    "candidate_lengths": [3],
    "max_new_tokens": 12,
    "seeds": [0],
    "corpus": {"synthetic": {"seed": 1, "count": 8, "vocab_size": 5}}
  })", ".");
  return c;
}

TEST(Sweep, SinglePointSinglePrompt) {
  ExperimentConfig c = small_config();
  c.corpus = SyntheticCorpusSpec{.seed = 1, .count = 2, .vocab_size = 5, .train_fraction = 0.5};
  const Corpus corpus = resolve_corpus(c.corpus);
  ASSERT_EQ(corpus.subset(Split::kTest).size(), 1u);
  const SweepResult r = run_sweep(c, corpus, ModelProvider(c.models));
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_FALSE(r.rows[0].error.has_value());
  EXPECT_EQ(r.rows[0].metrics.tokens, 12u);
}

TEST(Sweep, RfsdAtZeroRowsEqualSdRows) {
  ExperimentConfig c = small_config();
  c.policies = {policy::SD{}, policy::RFSD{DivergenceKind::kJS, 0.0}};
  c.seeds = {0, 1, 2};
  c.drafting.draft_mode = Sampled{1.0};
  const Corpus corpus = resolve_corpus(c.corpus);
  const SweepResult r = run_sweep(c, corpus, ModelProvider(c.models));
  ASSERT_EQ(r.rows.size(), 6u);
  for (std::size_t s = 0; s < 3; ++s) {
    EXPECT_EQ(r.rows[s].point.seed, r.rows[3 + s].point.seed);
    EXPECT_EQ(r.rows[s].metrics, r.rows[3 + s].metrics);
  }
}

TEST(Sweep, FsdAcceptanceRisesWithThreshold) {
  ExperimentConfig c = small_config();
  c.policies = {policy::FSD{DivergenceKind::kJS, 0.0}};
  c.thresholds = {0.0, 0.02, 0.05, 0.1, 0.2, 0.4, 0.7};
  const Corpus corpus = resolve_corpus(c.corpus);
  const SweepResult r = run_sweep(c, corpus, ModelProvider(c.models));
  ASSERT_EQ(r.rows.size(), c.thresholds.size());
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    EXPECT_GE(r.rows[i].metrics.acceptance_pct(), r.rows[i - 1].metrics.acceptance_pct());
  }
  EXPECT_EQ(r.rows.front().metrics.accepted, 0u);
  EXPECT_EQ(r.rows.back().metrics.acceptance_pct(), 100.0);
}

TEST(Sweep, GridCoverageAndWorkerIndependence) {
  ExperimentConfig c = small_config();
  c.policies = {policy::SD{}, policy::FSD{DivergenceKind::kKL, 0.0}, policy::Random{0.4}};
  c.thresholds = {0.0, 0.3};
  c.candidate_lengths = {1, 4};
  c.seeds = {3, 4};
  const Corpus corpus = resolve_corpus(c.corpus);
  const SweepResult serial = run_sweep(c, corpus, ModelProvider(c.models));
  c.workers = 3;
  std::size_t seen = 0;
  const SweepResult parallel =
      run_sweep(c, corpus, ModelProvider(c.models), [&](const SweepRow&) { ++seen; });
  EXPECT_EQ(serial.rows.size(), 3u * 2u * 2u * 2u);
  EXPECT_EQ(seen, serial.rows.size());
  EXPECT_EQ(metrics_csv(serial), metrics_csv(parallel));
  EXPECT_EQ(traces_csv(serial), traces_csv(parallel));
}

TEST(Sweep, PromptStreamsIgnorePosition) {
  const ModelPair models = pair_of({.seed = 4, .vocab_size = 5, .order = 1, .alignment = 0.5});
  const Corpus corpus = generate_corpus({.seed = 9, .count = 6, .vocab_size = 5});
  std::vector<PromptRecord> reversed(corpus.records.rbegin(), corpus.records.rend());
  DraftingConfig cfg;
  cfg.draft_mode = Sampled{1.0};
  const auto a = per_prompt_metrics(models, corpus.records, policy::SD{}, cfg, 10, 7);
  const auto b = per_prompt_metrics(models, reversed, policy::SD{}, cfg, 10, 7);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[a.size() - 1 - i]);
}

TEST(Sweep, RowErrorsAreRecordedAndSweepContinues) {
  const char* cli = std::getenv("FUZZYSPEC_CLI");
  if (cli == nullptr) GTEST_SKIP() << "FUZZYSPEC_CLI not set";
  ExperimentConfig c = small_config();
  RemoteModelConfig bad{SubprocessEndpoint{{cli, "serve-echo", "--vocab", "5", "--halve-sums"}},
                        std::chrono::milliseconds(5000), 5};
  c.models = RemoteEndpoints{bad, bad};
  c.policies = {policy::SD{}, policy::TargetOnly{}};
  c.seeds = {0, 1};
  const Corpus corpus = resolve_corpus(c.corpus);
  const SweepResult r = run_sweep(c, corpus, ModelProvider(c.models));
  ASSERT_EQ(r.rows.size(), 4u);
  for (const SweepRow& row : r.rows) {
    ASSERT_TRUE(row.error.has_value());
    EXPECT_NE(row.error->find("sums to 0.5"), std::string::npos) << *row.error;
  }
  const fs::path out = scratch("errors");
  const auto files = emit_reports(r, out);
  EXPECT_TRUE(fs::exists(out / "errors.log"));
  std::istringstream log(slurp(out / "errors.log"));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) ++lines;
  EXPECT_EQ(lines, 4u);
  fs::remove_all(out);
}

TEST(Sweep, RemoteEchoModelsDecode) {
  const char* cli = std::getenv("FUZZYSPEC_CLI");
  if (cli == nullptr) GTEST_SKIP() << "FUZZYSPEC_CLI not set";
  ExperimentConfig c = small_config();
  RemoteModelConfig echo{SubprocessEndpoint{{cli, "serve-echo", "--vocab", "5"}},
                         std::chrono::milliseconds(5000), 5};
  c.models = RemoteEndpoints{echo, echo};
  c.policies = {policy::SD{}, policy::FSD{DivergenceKind::kJS, 0.0}};
  c.thresholds = {0.1};
  const Corpus corpus = resolve_corpus(c.corpus);
  const SweepResult r = run_sweep(c, corpus, ModelProvider(c.models));
  ASSERT_EQ(r.rows.size(), 2u);
  for (const SweepRow& row : r.rows) {
    ASSERT_FALSE(row.error.has_value()) << *row.error;
    EXPECT_EQ(row.metrics.acceptance_pct(), 100.0);
  }
}

// ---------------------------------------------------------------------------
// Reports

TEST(Reports, EmptyResultWritesNothing) {
  const fs::path out = scratch("empty");
  EXPECT_THROW(emit_reports(SweepResult{}, out), Error);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Reports, OneRowAndDeterminism) {
  ExperimentConfig c = small_config();
  const Corpus corpus = resolve_corpus(c.corpus);
  const SweepResult r = run_sweep(c, corpus, ModelProvider(c.models));
  const fs::path a = scratch("rep_a");
  const fs::path b = scratch("rep_b");
  const auto files = emit_reports(r, a);
  emit_reports(r, b);
  EXPECT_EQ(files.size(), 4u);
  for (const fs::path& f : files) EXPECT_EQ(slurp(f), slurp(b / f.filename())) << f;
  const std::string csv = slurp(a / "metrics.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kMetricsHeader);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_FALSE(fs::exists(a / "errors.log"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Reports, IdenticalConfigsGiveIdenticalFiles) {
  const auto run_once = [] {
    ExperimentConfig c = small_config();
    c.policies = {policy::SD{}, policy::FSD{DivergenceKind::kJS, 0.0}};
    c.thresholds = {0.0, 0.1};
    c.drafting.draft_mode = Sampled{0.8};
    const SweepResult r = run_sweep(c, resolve_corpus(c.corpus), ModelProvider(c.models));
    return metrics_csv(r) + summary_json(r) + traces_csv(r) + tradeoff_csv(r);
  };
  EXPECT_EQ(run_once(), run_once());
}

// ---------------------------------------------------------------------------
// Tuning

DecodeSettings settings() {
  DecodeSettings s;
  s.max_new_tokens = 24;
  return s;
}

TEST(Tuning, AlignedPairPicksLongestLength) {
  const ModelPair m = pair_of({.seed = 1, .vocab_size = 5, .order = 1, .alignment = 1.0});
  const Corpus dev = generate_corpus({.seed = 2, .count = 8, .vocab_size = 5});
  DecodeSettings s = settings();
  s.max_new_tokens = 3696;  // divisible by 6, 11, 16 and 21
  const LengthChoice c =
      select_candidate_length(m, dev.records, {5, 10, 15, 20}, policy::SD{}, s);
  EXPECT_EQ(c.chosen, 20u);
  for (const auto& [l, metrics] : c.evaluated) {
    EXPECT_DOUBLE_EQ(metrics.target_calls_per_token(), 1.0 / static_cast<double>(l + 1));
  }
}

TEST(Tuning, MisalignedZeroThresholdPicksShortestLength) {
  const ModelPair m = pair_of({.seed = 1, .vocab_size = 5, .order = 1, .alignment = 0.0});
  const Corpus dev = generate_corpus({.seed = 2, .count = 8, .vocab_size = 5});
  const LengthChoice c = select_candidate_length(
      m, dev.records, {20, 15, 10, 5}, policy::FSD{DivergenceKind::kJS, 0.0}, settings());
  EXPECT_EQ(c.chosen, 5u);
  EXPECT_EQ(select_candidate_length(m, dev.records, {7}, policy::SD{}, settings()).chosen, 7u);
}

TEST(Tuning, MatchThreshold) {
  const Corpus dev = generate_corpus({.seed = 2, .count = 8, .vocab_size = 5});
  const ModelPair aligned = pair_of({.seed = 1, .vocab_size = 5, .order = 1, .alignment = 1.0});
  const ThresholdMatch a =
      match_sd_threshold(aligned, dev.records, DivergenceKind::kJS, 5, {0.0, 0.1, 0.2}, settings());
  EXPECT_EQ(a.sd_acceptance_pct, 100.0);
  EXPECT_EQ(a.chosen, 0.1);
  EXPECT_EQ(match_sd_threshold(aligned, dev.records, DivergenceKind::kJS, 5, {0.0}, settings())
                .chosen,
            0.0);

  const ModelPair skew = pair_of({.seed = 1, .vocab_size = 5, .order = 1, .alignment = 0.3});
  std::vector<double> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(0.1 * i);
  const ThresholdMatch m =
      match_sd_threshold(skew, dev.records, DivergenceKind::kJS, 5, grid, settings());
  double best = 1e300;
  for (const auto& [t, metrics] : m.evaluated) {
    best = std::min(best, std::abs(metrics.acceptance_pct() - m.sd_acceptance_pct));
  }
  for (const auto& [t, metrics] : m.evaluated) {
    if (t == m.chosen) EXPECT_EQ(std::abs(metrics.acceptance_pct() - m.sd_acceptance_pct), best);
  }
}

TEST(Tuning, DegenerateDevEqualsTest) {
  const ModelPair m = pair_of({.seed = 3, .vocab_size = 5, .order = 1, .alignment = 0.5});
  const Corpus corpus = generate_corpus({.seed = 4, .count = 8, .vocab_size = 5});
  const TuningTable t = tune_threshold_on_dev(m, corpus.records, corpus.records,
                                              DivergenceKind::kJS, {0.05, 0.2}, 3, {8}, 3,
                                              settings());
  for (const TuningRow& row : t.rows) EXPECT_NEAR(row.mean_pct_error[0], 0.0, 1e-12);
}

TEST(Tuning, SingleTrial) {
  const ModelPair m = pair_of({.seed = 3, .vocab_size = 5, .order = 1, .alignment = 0.5});
  const Corpus corpus = generate_corpus({.seed = 4, .count = 40, .vocab_size = 5});
  const TuningTable t =
      tune_threshold_on_dev(m, corpus.subset(Split::kTrain), corpus.subset(Split::kTest),
                            DivergenceKind::kJS, {0.1}, 3, {4}, 1, settings());
  ASSERT_EQ(t.rows.size(), 1u);
  ASSERT_EQ(t.rows[0].trial_errors[0].size(), 1u);
  EXPECT_EQ(t.rows[0].mean_pct_error[0], t.rows[0].trial_errors[0][0]);
  EXPECT_FALSE(tuning_table_text(t).empty());
}

TEST(Tuning, InsufficientCorpus) {
  const ModelPair m = pair_of({.seed = 3, .vocab_size = 5});
  const Corpus corpus = generate_corpus({.seed = 4, .count = 10, .vocab_size = 5});
  EXPECT_EQ(code_of([&] {
              tune_threshold_on_dev(m, corpus.subset(Split::kTrain), corpus.subset(Split::kTest),
                                    DivergenceKind::kJS, {0.1}, 3, {4, 8}, 2, settings());
            }),
            ErrorCode::kInsufficientCorpus);
}

// ---------------------------------------------------------------------------
// Verify suites

TEST(Verify, SuiteNames) {
  for (auto s : {VerifySuite::kSdEquivalence, VerifySuite::kFsdBound,
                 VerifySuite::kRandomBaseline, VerifySuite::kRfsdReduction}) {
    EXPECT_EQ(parse_verify_suite(to_string(s)), s);
  }
  EXPECT_FALSE(parse_verify_suite("everything").has_value());
}

TEST(Verify, SuitesPassAndSerialise) {
  for (auto s : {VerifySuite::kSdEquivalence, VerifySuite::kFsdBound,
                 VerifySuite::kRandomBaseline, VerifySuite::kRfsdReduction}) {
    const SuiteResult r = run_suite(s, 0);
    EXPECT_TRUE(r.passed) << to_string(s);
    const std::string jsonl = to_jsonl(r.records);
    EXPECT_EQ(static_cast<std::size_t>(std::count(jsonl.begin(), jsonl.end(), '\n')),
              r.records.size());
  }
}

}  // namespace
}  // namespace fuzzyspec::harness
