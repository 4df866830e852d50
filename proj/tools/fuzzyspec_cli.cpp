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

// Command-line front end: sweeps, tuning, oracle suites and the echo server.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fuzzyspec/error.hpp"
#include "fuzzyspec/harness/config.hpp"
#include "fuzzyspec/harness/report.hpp"
#include "fuzzyspec/harness/sweep.hpp"
#include "fuzzyspec/harness/tuning.hpp"
#include "fuzzyspec/harness/verify.hpp"
#include "fuzzyspec/remote.hpp"

namespace fs = std::filesystem;
using namespace fuzzyspec;
using namespace fuzzyspec::harness;

namespace {

struct GlobalFlags {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<double> cost_ratio;
};

ExperimentConfig load_with_overrides(const std::string& path, const GlobalFlags& flags) {
  ExperimentConfig config = load_config(path);
  if (flags.seed) config.seeds = {*flags.seed};
  if (flags.workers) config.workers = *flags.workers;
  if (flags.cost_ratio) config.cost_ratio = *flags.cost_ratio;
  validate(config);
  return config;
}

DecodeSettings settings_of(const ExperimentConfig& config) {
  return DecodeSettings{config.drafting, config.max_new_tokens, config.seeds.front(),
                        config.cost_ratio};
}

int cmd_run(const std::string& config_path, const std::optional<std::string>& out,
            const GlobalFlags& flags) {
  const ExperimentConfig config = load_with_overrides(config_path, flags);
  const Corpus corpus = resolve_corpus(config.corpus);
  const ModelProvider models(config.models);
  std::size_t done = 0;
  const std::size_t total = expand_grid(config).size();
  const SweepResult result = run_sweep(config, corpus, models, [&](const SweepRow& row) {
    ++done;
    std::cerr << "[" << done << "/" << total << "] " << policy_label(row.point.policy)
              << " T=" << row.point.threshold << " L=" << row.point.candidate_length
              << " seed=" << row.point.seed
              << (row.error ? " ERROR: " + *row.error : std::string()) << "\n";
  });
  const fs::path outdir = out ? fs::path(*out) : config.output_dir;
  for (const fs::path& p : emit_reports(result, outdir)) std::cout << p.string() << "\n";
  for (const SweepRow& row : result.rows) {
    if (row.error) return 1;
  }
  return 0;
}

int cmd_tune_length(const std::string& config_path, const GlobalFlags& flags) {
  const ExperimentConfig config = load_with_overrides(config_path, flags);
  const Corpus corpus = resolve_corpus(config.corpus);
  const ModelProvider provider(config.models);
  corpus.check_vocab(provider.vocab_size());
  std::vector<PromptRecord> train = corpus.subset(Split::kTrain);
  if (train.size() < config.tuning.dev_size) {
    throw Error(ErrorCode::kInsufficientCorpus, "train split smaller than dev_size");
  }
  train.resize(config.tuning.dev_size);
  const ModelPair models = provider.acquire();
  const DecodeSettings settings = settings_of(config);

  const LengthChoice length = select_candidate_length(
      models, train, config.tuning.length_grid, config.tuning.length_policy, settings);
  for (const auto& [l, m] : length.evaluated) {
    std::cout << "L=" << l << " target_calls_per_token=" << m.target_calls_per_token()
              << " accept_pct=" << m.acceptance_pct() << "\n";
  }
  std::cout << "chosen L=" << length.chosen << "\n";

  const ThresholdMatch match = match_sd_threshold(models, train, config.tuning.kind,
                                                  length.chosen, config.thresholds, settings);
  std::cout << "SD accept_pct=" << match.sd_acceptance_pct << "\n";
  for (const auto& [t, m] : match.evaluated) {
    std::cout << "T=" << t << " accept_pct=" << m.acceptance_pct() << "\n";
  }
  std::cout << "matched T=" << match.chosen << "\n";
  return 0;
}

int cmd_tune_threshold(const std::string& config_path, const std::vector<std::size_t>& sizes,
                       std::optional<std::size_t> trials, const GlobalFlags& flags) {
  const ExperimentConfig config = load_with_overrides(config_path, flags);
  const Corpus corpus = resolve_corpus(config.corpus);
  const ModelProvider provider(config.models);
  corpus.check_vocab(provider.vocab_size());
  const std::vector<std::size_t> dev_sizes = sizes.empty() ? config.tuning.dev_sizes : sizes;
  const TuningTable table = tune_threshold_on_dev(
      provider.acquire(), corpus.subset(Split::kTrain), corpus.subset(Split::kTest),
      config.tuning.kind, config.thresholds, config.candidate_lengths.front(), dev_sizes,
      trials.value_or(config.tuning.trials), settings_of(config));
  std::cout << tuning_table_text(table);
  return 0;
}

int cmd_verify(const std::string& suite_name, std::uint64_t seed, const std::string& out) {
  const auto suite = parse_verify_suite(suite_name);
  if (!suite) throw Error(ErrorCode::kInvalidArgument, "unknown suite: " + suite_name);
  const SuiteResult result = run_suite(*suite, seed);
  std::error_code ec;
  fs::create_directories(out, ec);
  const fs::path path = fs::path(out) / "verify.jsonl";
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  file << to_jsonl(result.records);
  std::size_t failed = 0;
  std::size_t flagged = 0;
  for (const VerifyRecord& r : result.records) {
    failed += r.passed ? 0 : 1;
    flagged += r.flagged ? 1 : 0;
  }
  std::cout << to_string(*suite) << ": " << result.records.size() << " checks, " << failed
            << " failed, " << flagged << " flagged -> " << (result.passed ? "PASS" : "FAIL")
            << "\n";
  return result.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fuzzyspec: speculative decoding laboratory"};
  app.require_subcommand(1);

  GlobalFlags flags;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  double cost_ratio = 0.125;
  auto* seed_opt = app.add_option("--seed", seed, "Seed override")->configurable(false);
  auto* workers_opt = app.add_option("--workers", workers, "Concurrent sweep rows");
  auto* cost_opt = app.add_option("--cost-ratio", cost_ratio, "Draft/target call cost ratio");
  app.fallthrough();

  std::string config_path;
  std::optional<std::string> out_dir;

  auto* run = app.add_subcommand("run", "Run a sweep and write reports");
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--out", out_dir, "Output directory");

  auto* tune_l = app.add_subcommand("tune-L", "Choose L on a dev set and match T to SD");
  tune_l->add_option("--config", config_path, "Config file")->required();

  std::vector<std::size_t> dev_sizes;
  std::optional<std::size_t> trials;
  auto* tune_t = app.add_subcommand("tune-T", "Dev-set speed prediction error");
  tune_t->add_option("--config", config_path, "Config file")->required();
  tune_t->add_option("--dev-sizes", dev_sizes, "Dev sizes")->delimiter(',');
  tune_t->add_option("--trials", trials, "Trials per dev size");

  std::string suite;
  std::string verify_out = ".";
  auto* verify = app.add_subcommand("verify", "Run an oracle suite");
  verify->add_option("--suite", suite, "Suite name")
      ->required()
      ->check(CLI::IsMember({"sd-equivalence", "fsd-bound", "random-baseline", "rfsd-reduction"}));
  verify->add_option("--out", verify_out, "Directory for verify.jsonl");

  EchoServerOptions echo;
  std::optional<std::uint16_t> port;
  std::size_t max_connections = 0;
  auto* serve = app.add_subcommand("serve-echo", "Echo logit server on stdio or TCP");
  serve->add_option("--vocab", echo.vocab_size, "Vocabulary size");
  serve->add_option("--name", echo.name, "Server name");
  serve->add_flag("--halve-sums", echo.halve_sums, "Reply with rows summing to 0.5");
  serve->add_option("--port", port, "Listen on this TCP port instead of stdio");
  serve->add_option("--max-connections", max_connections, "Stop after this many (0: never)");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) flags.seed = seed;
  if (*workers_opt) flags.workers = workers;
  if (*cost_opt) flags.cost_ratio = cost_ratio;

  try {
    if (*run) return cmd_run(config_path, out_dir, flags);
    if (*tune_l) return cmd_tune_length(config_path, flags);
    if (*tune_t) return cmd_tune_threshold(config_path, dev_sizes, trials, flags);
    if (*verify) return cmd_verify(suite, seed, verify_out);
    if (*serve) {
      const EchoServer server(echo);
      if (port) {
        server.serve_tcp(*port, max_connections, [](std::uint16_t bound) {
          std::cout << "listening on 127.0.0.1:" << bound << std::endl;
        });
      } else {
        server.serve(std::cin, std::cout);
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
