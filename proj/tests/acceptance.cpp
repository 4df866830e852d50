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

// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure. argv[1] is the CLI binary, used for the subprocess echo server
// and the end-to-end report determinism check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "fuzzyspec/decoding.hpp"
#include "fuzzyspec/divergence.hpp"
#include "fuzzyspec/error.hpp"
#include "fuzzyspec/harness/config.hpp"
#include "fuzzyspec/harness/corpus.hpp"
#include "fuzzyspec/harness/report.hpp"
#include "fuzzyspec/harness/sweep.hpp"
#include "fuzzyspec/harness/tuning.hpp"
#include "fuzzyspec/harness/verify.hpp"
#include "fuzzyspec/oracle.hpp"
#include "fuzzyspec/remote.hpp"
#include "fuzzyspec/table_model.hpp"

namespace fs = std::filesystem;
using namespace fuzzyspec;
using namespace fuzzyspec::harness;

namespace {

std::string g_cli;

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ProbDist random_dist(Rng& rng, std::size_t vocab) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(vocab));
  for (auto& x : w) x = -std::log1p(-rng.uniform());
  // a few exact zeros, but never all of them
  for (Eigen::Index i = 1; i < w.size(); ++i) {
    if (rng.uniform() < 0.15) w[i] = 0.0;
  }
  return normalize(w);
}

double max_context_divergence(const TableModel& t, const TableModel& d, DivergenceKind kind) {
  double best = 0.0;
  for (std::size_t len = 0; len <= t.order(); ++len) {
    for (const TokenSeq& ctx : all_contexts(t.vocab_size(), len)) {
      best = std::max(best, divergence(kind, t.lookup(ctx), d.lookup(ctx)));
    }
  }
  return best;
}

std::vector<double> context_divergences(const TableModel& t, const TableModel& d,
                                        DivergenceKind kind) {
  std::vector<double> out;
  for (std::size_t len = 0; len <= t.order(); ++len) {
    for (const TokenSeq& ctx : all_contexts(t.vocab_size(), len)) {
      out.push_back(divergence(kind, t.lookup(ctx), d.lookup(ctx)));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

double tv_of(const SequenceDist& a, const SequenceDist& b) {
  return sequence_divergence(DivergenceKind::kTV, a, b);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

Outcome c1_per_step_identity() {
  Rng rng(11, 1);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t vocab = 2 + rng.next_u64() % 63;
    const ProbDist pt = random_dist(rng, vocab);
    const ProbDist pd = random_dist(rng, vocab);
    Eigen::VectorXd law = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab));
    double reject = 0.0;
    for (std::size_t x = 0; x < vocab; ++x) {
      const double q = pd.probs()[x];
      if (q == 0.0) continue;
      const double a = sd_accept_prob(pt.probs()[x], q);
      law[x] += q * a;
      reject += q * (1.0 - a);
    }
    if (reject > 0.0) law += reject * residual_dist(pt, pd).probs();
    worst = std::max(worst, (law - pt.probs()).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-12, fmt::format("1000 pairs, max |law - pT| = {:.3e}", worst)};
}

Outcome c2_sd_equivalence() {
  const SuiteResult r = run_sd_equivalence(2, 50);
  double worst = 0.0;
  for (const auto& rec : r.records) {
    for (const auto& [k, v] : rec.values) {
      if (k == "tv") worst = std::max(worst, v);
    }
  }
  return {r.passed && r.records.size() == 50,
          fmt::format("{} instances, max TV = {:.3e}", r.records.size(), worst)};
}

Outcome c3_fsd_bound() {
  const SuiteResult r = run_fsd_bound(3, 100);
  std::map<std::string, std::size_t> total, bad, flagged;
  std::map<std::string, std::vector<double>> slacks;
  for (const auto& rec : r.records) {
    ++total[rec.check];
    if (!rec.passed) ++bad[rec.check];
    if (rec.flagged) ++flagged[rec.check];
    for (const auto& [k, v] : rec.values) {
      if (k == "slack") slacks[rec.check].push_back(v);
    }
  }
  std::string detail;
  for (const auto& [check, n] : total) {
    std::vector<double>& v = slacks[check];
    std::sort(v.begin(), v.end());
    detail += fmt::format("{} {}/{} ok, {} flagged, slack min/median/max {:.2e}/{:.2e}/{:.2e}; ",
                          check, n - bad[check], n, flagged[check], v.front(), v[v.size() / 2],
                          v.back());
  }
  return {r.passed, detail};
}

Outcome c4_rfsd_reduction() {
  const SuiteResult r = run_rfsd_reduction(4, 100);
  const auto ok = std::count_if(r.records.begin(), r.records.end(),
                                [](const VerifyRecord& v) { return v.passed; });
  return {r.passed && r.records.size() == 100,
          fmt::format("{}/{} bitwise identical", ok, r.records.size())};
}

Outcome c5_endpoints() {
  Rng rng(5, 5);
  double worst_tv = 0.0;
  double min_accept = 100.0;
  InstanceRanges ranges;
  for (int i = 0; i < 50; ++i) {
    const OracleInstance inst = random_instance(rng, ranges);
    const auto kind = static_cast<DivergenceKind>(i % 3);
    const SequenceDist target = enumerate_target_dist(inst.target, inst.prompt, inst.length);
    const SequenceDist fsd = enumerate_fsd_dist(
        inst.target, inst.draft, inst.prompt, inst.length,
        FuzzyProcess{kind, 0.0, inst.block_length, true});
    worst_tv = std::max(worst_tv, tv_of(target, fsd));

    const double t_high = std::nextafter(max_context_divergence(inst.target, inst.draft, kind),
                                         INFINITY) * 1.01 + 1e-12;
    DraftingConfig cfg;
    cfg.candidate_length = inst.block_length;
    cfg.draft_mode = (i % 2 == 0) ? SamplingMode{Greedy{}} : SamplingMode{Sampled{1.0}};
    for (std::uint64_t s = 0; s < 4; ++s) {
      Rng dr(s, static_cast<std::uint64_t>(i));
      const DecodeResult res = decode(inst.target, inst.draft, inst.prompt,
                                      policy::FSD{kind, t_high}, cfg, 16, dr);
      min_accept = std::min(min_accept, compute_metrics(res.trace).acceptance_pct());
    }
  }
  return {worst_tv <= 1e-12 && min_accept == 100.0,
          fmt::format("T=0: max TV {:.3e}; T>max div: min acceptance {}%", worst_tv,
                      min_accept)};
}

Outcome c6_monte_carlo() {
  Rng rng(6, 6);
  InstanceRanges ranges;
  ranges.min_vocab = ranges.max_vocab = 3;
  ranges.min_length = ranges.max_length = 3;
  ranges.min_alignment = 0.2;
  ranges.max_alignment = 0.8;
  constexpr std::size_t kDecodes = 100000;
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const OracleInstance inst = random_instance(rng, ranges);
    const auto kind = static_cast<DivergenceKind>(i % 3);
    const std::vector<double> divs = context_divergences(inst.target, inst.draft, kind);
    const double threshold = divs[divs.size() / 2];
    const FuzzyProcess process{kind, threshold, inst.block_length, true};
    const SequenceDist exact =
        enumerate_fsd_dist(inst.target, inst.draft, inst.prompt, 3, process);

    DraftingConfig cfg;
    cfg.candidate_length = inst.block_length;
    cfg.draft_mode = Sampled{1.0};
    SequenceDist empirical{3, 3, {}};
    for (std::size_t n = 0; n < kDecodes; ++n) {
      Rng dr(600 + static_cast<std::uint64_t>(i), n);
      const DecodeResult res = decode(inst.target, inst.draft, inst.prompt,
                                      policy::FSD{kind, threshold}, cfg, 3, dr);
      empirical.probs[res.tokens] += 1.0 / kDecodes;
    }
    worst = std::max(worst, tv_of(exact, empirical));
  }
  return {worst <= 0.02, fmt::format("10 instances x 1e5 decodes, max TV {:.4f}", worst)};
}

Outcome c7_monotonicity() {
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(0.1 * i);
  const std::vector<double> alphas = {0.1, 0.3, 0.5, 0.7, 0.9};
  std::size_t t_violations = 0;
  std::size_t a_violations = 0;
  std::size_t t_checks = 0;
  std::size_t a_checks = 0;
  std::string first;

  DraftingConfig cfg;
  cfg.candidate_length = 4;
  cfg.draft_mode = Greedy{};

  for (std::uint64_t inst = 0; inst < 20; ++inst) {
    const std::size_t vocab = 4 + inst % 5;
    const std::size_t order = 1 + inst % 2;
    const Corpus prompts =
        generate_corpus({.seed = 700 + inst, .count = 8, .vocab_size = vocab});
    std::vector<std::vector<RunMetrics>> by_alpha;
    for (const double alpha : alphas) {
      auto [t, d] = generate_pair({.seed = 70 + inst, .vocab_size = vocab, .order = order,
                                   .alignment = alpha});
      const ModelPair models{std::make_shared<TableModel>(std::move(t)),
                             std::make_shared<TableModel>(std::move(d))};
      std::vector<RunMetrics> row;
      for (const double threshold : grid) {
        RunMetrics total;
        for (const RunMetrics& m :
             per_prompt_metrics(models, prompts.records,
                                policy::FSD{DivergenceKind::kJS, threshold}, cfg, 32, inst)) {
          total += m;
        }
        row.push_back(total);
      }
      for (std::size_t k = 1; k < row.size(); ++k) {
        t_checks += 2;
        const bool pct_ok = row[k].acceptance_pct() >= row[k - 1].acceptance_pct();
        const bool alen_ok = row[k].acceptance_length() >= row[k - 1].acceptance_length();
        t_violations += !pct_ok + !alen_ok;
        if ((!pct_ok || !alen_ok) && first.empty()) {
          first = fmt::format("instance {} alpha {} T {:.1f}->{:.1f}: accept {:.2f}->{:.2f}, "
                              "ALen {:.3f}->{:.3f}",
                              inst, alpha, grid[k - 1], grid[k], row[k - 1].acceptance_pct(),
                              row[k].acceptance_pct(), row[k - 1].acceptance_length(),
                              row[k].acceptance_length());
        }
      }
      by_alpha.push_back(std::move(row));
    }
    for (std::size_t a = 1; a < alphas.size(); ++a) {
      for (std::size_t k = 0; k < grid.size(); ++k) {
        ++a_checks;
        if (by_alpha[a][k].pct_from_draft() < by_alpha[a - 1][k].pct_from_draft()) {
          ++a_violations;
          if (first.empty()) {
            first = fmt::format("instance {} T {:.1f} alpha {}->{}: %MD {:.4f}->{:.4f}", inst,
                                grid[k], alphas[a - 1], alphas[a],
                                by_alpha[a - 1][k].pct_from_draft(),
                                by_alpha[a][k].pct_from_draft());
          }
        }
      }
    }
  }
  std::string detail = fmt::format("T-direction {}/{} violations, alpha-direction {}/{}",
                                   t_violations, t_checks, a_violations, a_checks);
  if (!first.empty()) detail += "; first: " + first;
  return {t_violations == 0 && a_violations == 0, detail};
}

Outcome c8_random_baseline() {
  const SuiteResult r = run_random_baseline(8, 100);
  std::string share;
  for (const auto& rec : r.records) {
    if (rec.check == "dominance-share") {
      for (const auto& [k, v] : rec.values) share += fmt::format("{}={} ", k, v);
    }
  }
  return {r.passed, share};
}

Outcome c9_tuning_trend() {
  auto [t, d] = generate_pair({.seed = 9, .vocab_size = 8, .order = 1, .alignment = 0.4});
  // thresholds inside the range where acceptance is neither 0% nor 100%
  const std::vector<double> divs = context_divergences(t, d, DivergenceKind::kJS);
  std::vector<double> thresholds;
  for (const double q : {0.2, 0.35, 0.5, 0.65, 0.8}) {
    thresholds.push_back(divs[static_cast<std::size_t>(q * (divs.size() - 1))]);
  }
  const ModelPair models{std::make_shared<TableModel>(std::move(t)),
                         std::make_shared<TableModel>(std::move(d))};
  const Corpus corpus =
      generate_corpus({.seed = 90, .count = 512, .vocab_size = 8, .min_length = 1,
                       .max_length = 6, .train_fraction = 0.5});
  DecodeSettings settings;
  settings.drafting.draft_mode = Sampled{1.0};
  settings.max_new_tokens = 24;
  settings.seed = 9;
  const TuningTable table =
      tune_threshold_on_dev(models, corpus.subset(Split::kTrain), corpus.subset(Split::kTest),
                            DivergenceKind::kJS, thresholds, 5, {4, 8, 16, 32}, 10, settings);
  bool ok = true;
  std::string detail = "T: err(n=4) -> err(n=32) ";
  for (const TuningRow& row : table.rows) {
    const double e4 = row.mean_pct_error.front();
    const double e32 = row.mean_pct_error.back();
    ok = ok && e32 <= e4;
    detail += fmt::format("[{:.4f}: {:.2f}% -> {:.2f}%] ", row.threshold, e4, e32);
  }
  return {ok, detail};
}

ExperimentConfig tiny_config() {
  return parse_config(R"({
    "models": {"synthetic": {"seed": 7, "vocab_size": 8, "order": 1, "alignment": 0.3}},
    "policies": ["SD", "FSD:JS", "rFSD:JS", "Random:0.5", "TargetOnly", "DraftOnly"],
    "thresholds": [0.0, 0.1],
    "candidate_lengths": [5],
    "max_new_tokens": 16,
    "seeds": [0, 1],
    "corpus": {"synthetic": {"seed": 1, "count": 16, "vocab_size": 8}}
  })", ".");
}

Outcome c10_schema() {
  const ExperimentConfig cfg = tiny_config();
  const SweepResult r = run_sweep(cfg, resolve_corpus(cfg.corpus), ModelProvider(cfg.models));
  const std::string csv = metrics_csv(r);
  const std::string header = csv.substr(0, csv.find('\n'));
  bool ok = header == kMetricsHeader;
  for (const char* col : {"policy", "T", "ALen", "accept_pct", "pct_md", "proxy_speed"}) {
    ok = ok && header.find(col) != std::string::npos;
  }
  const auto lines = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
  ok = ok && lines == r.rows.size() + 1;
  return {ok,
          fmt::format("benchmark accuracy and tokens/sec not reproducible without real LLMs; "
                      "metrics.csv schema check: {} rows, header ok = {}",
                      r.rows.size(), header == kMetricsHeader)};
}

Outcome c11_determinism_protocol() {
  std::vector<std::string> problems;

  // in-process determinism across worker counts
  ExperimentConfig cfg = tiny_config();
  const Corpus corpus = resolve_corpus(cfg.corpus);
  const fs::path base = fs::temp_directory_path() / "fuzzyspec_acceptance";
  fs::remove_all(base);
  emit_reports(run_sweep(cfg, corpus, ModelProvider(cfg.models)), base / "a");
  cfg.workers = 3;
  emit_reports(run_sweep(cfg, corpus, ModelProvider(cfg.models)), base / "b");
  for (const char* f : {"metrics.csv", "summary.json", "traces.csv", "tradeoff.csv"}) {
    if (slurp(base / "a" / f) != slurp(base / "b" / f)) problems.push_back(fmt::format("{} differs", f));
  }

  // CLI end to end, twice
  if (!g_cli.empty()) {
    std::ofstream(base / "cfg.json") << R"({
      "models": {"synthetic": {"seed": 3, "vocab_size": 6, "order": 2, "alignment": 0.5}},
      "policies": ["SD", "FSD:KL"], "thresholds": [0.05, 0.3], "candidate_lengths": [3],
      "drafting": {"draft_mode": "sampled"}, "max_new_tokens": 12, "seeds": [0, 1],
      "corpus": {"synthetic": {"seed": 2, "count": 12, "vocab_size": 6}}})";
    for (const char* run : {"c1", "c2"}) {
      const std::string cmd = fmt::format("\"{}\" run --config \"{}\" --out \"{}\" >/dev/null 2>&1",
                                          g_cli, (base / "cfg.json").string(),
                                          (base / run).string());
      if (std::system(cmd.c_str()) != 0) problems.push_back(std::string("cli run failed: ") + run);
    }
    for (const char* f : {"metrics.csv", "summary.json", "traces.csv", "tradeoff.csv"}) {
      const std::string a = slurp(base / "c1" / f);
      if (a.empty() || a != slurp(base / "c2" / f)) problems.push_back(fmt::format("cli {} differs", f));
    }
  }

  // echo server round trips
  std::size_t violations = 0;
  std::size_t rounds = 0;
  {
    auto transport =
        g_cli.empty()
            ? std::unique_ptr<LineTransport>(new LoopbackTransport(
                  [server = EchoServer({.vocab_size = 8})](const std::string& l) {
                    return server.handle(l);
                  }))
            : open_transport({SubprocessEndpoint{{g_cli, "serve-echo", "--vocab", "8"}},
                              std::chrono::milliseconds(5000), 8});
    RemoteModel model(std::move(transport), 8, std::chrono::milliseconds(5000));
    Rng rng(11, 11);
    for (; rounds < 1000; ++rounds) {
      TokenSeq ctx(1 + rng.next_u64() % 6);
      for (auto& tok : ctx) tok = static_cast<TokenId>(rng.next_u64() % 8);
      try {
        const auto rows = model.next_dists(ctx, rng.next_u64() % ctx.size());
        (void)rows;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kProtocolViolation) ++violations;
        else throw;
      }
    }
  }
  if (violations != 0) problems.push_back(fmt::format("{} protocol violations", violations));

  // malformed sums
  bool raised = false;
  try {
    auto transport =
        g_cli.empty()
            ? std::unique_ptr<LineTransport>(new LoopbackTransport(
                  [server = EchoServer({.vocab_size = 8, .halve_sums = true})](
                      const std::string& l) { return server.handle(l); }))
            : open_transport(
                  {SubprocessEndpoint{{g_cli, "serve-echo", "--vocab", "8", "--halve-sums"}},
                   std::chrono::milliseconds(5000), 8});
    RemoteModel model(std::move(transport), 8, std::chrono::milliseconds(5000));
    const TokenSeq ctx = {1, 2};
    model.next_dist(ctx);
  } catch (const Error& e) {
    raised = e.code() == ErrorCode::kProtocolViolation;
  }
  if (!raised) problems.push_back("halved sums not rejected");
  fs::remove_all(base);

  std::string detail = fmt::format("reports byte-identical ({}), {} echo round trips, {} "
                                   "violations, malformed sum -> ProtocolViolation: {}",
                                   g_cli.empty() ? "in-process" : "in-process + CLI", rounds,
                                   violations, raised);
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

struct Criterion {
  int id;
  double time_limit;  // seconds, 0 = none
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_cli = argv[1];
  const std::vector<Criterion> criteria = {
      {1, 1.0, c1_per_step_identity},  {2, 10.0, c2_sd_equivalence},
      {3, 60.0, c3_fsd_bound},         {4, 0.0, c4_rfsd_reduction},
      {5, 0.0, c5_endpoints},          {6, 120.0, c6_monte_carlo},
      {7, 0.0, c7_monotonicity},       {8, 0.0, c8_random_baseline},
      {9, 0.0, c9_tuning_trend},       {10, 0.0, c10_schema},
      {11, 0.0, c11_determinism_protocol},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(start);
    if (c.time_limit > 0.0 && secs >= c.time_limit) {
      out.passed = false;
      out.detail += fmt::format("; over time limit {} s", c.time_limit);
    }
    failures += !out.passed;
    fmt::print("criterion {:>2}: {} [{:.2f} s] {}\n", c.id, out.passed ? "PASS" : "FAIL", secs,
               out.detail);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
