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

#include "fuzzyspec/harness/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fuzzyspec/error.hpp"

namespace fuzzyspec::harness {

using json = nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorCode::kParseError, "config: " + what);
}

void allow_keys(const json& obj, std::string_view where,
                std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) config_error(std::string(where) + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      config_error("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

SamplingMode parse_mode(const std::string& name, double temperature) {
  if (name == "greedy") return Greedy{};
  if (name == "sampled") return Sampled{temperature};
  config_error("sampling mode must be 'greedy' or 'sampled', got '" + name + "'");
}

RemoteModelConfig parse_endpoint(const json& obj, std::size_t vocab_size,
                                 std::chrono::milliseconds timeout) {
  allow_keys(obj, "remote endpoint", {"command", "host", "port"});
  RemoteModelConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.timeout = timeout;
  if (obj.contains("command")) {
    cfg.transport = SubprocessEndpoint{obj["command"].get<std::vector<std::string>>()};
  } else if (obj.contains("port")) {
    cfg.transport = TcpEndpoint{obj.value("host", std::string("127.0.0.1")),
                                obj["port"].get<std::uint16_t>()};
  } else {
    config_error("remote endpoint needs 'command' or 'port'");
  }
  return cfg;
}

ModelSource parse_models(const json& obj, const std::filesystem::path& base) {
  allow_keys(obj, "models", {"synthetic", "tables", "remote"});
  if (obj.size() != 1) config_error("models must name exactly one source");
  if (obj.contains("synthetic")) {
    const json& s = obj["synthetic"];
    allow_keys(s, "models.synthetic",
               {"seed", "vocab_size", "order", "alignment", "noise_temperature"});
    SyntheticModels m;
    m.spec.seed = s.value("seed", m.spec.seed);
    m.spec.vocab_size = s.value("vocab_size", m.spec.vocab_size);
    m.spec.order = s.value("order", m.spec.order);
    m.spec.alignment = s.value("alignment", m.spec.alignment);
    m.spec.noise_temperature = s.value("noise_temperature", m.spec.noise_temperature);
    return m;
  }
  if (obj.contains("tables")) {
    const json& t = obj["tables"];
    allow_keys(t, "models.tables", {"target", "draft"});
    return TableFiles{resolve(base, t.at("target").get<std::string>()),
                      resolve(base, t.at("draft").get<std::string>())};
  }
  const json& r = obj["remote"];
  allow_keys(r, "models.remote", {"target", "draft", "vocab_size", "timeout_ms"});
  const auto vocab = r.at("vocab_size").get<std::size_t>();
  const std::chrono::milliseconds timeout(r.value("timeout_ms", 5000));
  return RemoteEndpoints{parse_endpoint(r.at("target"), vocab, timeout),
                         parse_endpoint(r.at("draft"), vocab, timeout)};
}

DraftingConfig parse_drafting(const json& obj) {
  allow_keys(obj, "drafting",
             {"draft_mode", "draft_temperature", "rejection_sampling", "rejection_temperature",
              "bonus_token", "schedule", "stop_token"});
  DraftingConfig d;
  d.draft_mode = parse_mode(obj.value("draft_mode", std::string("greedy")),
                            obj.value("draft_temperature", 1.0));
  d.rejection_sampling = parse_mode(obj.value("rejection_sampling", std::string("sampled")),
                                    obj.value("rejection_temperature", 1.0));
  d.bonus_token = obj.value("bonus_token", true);
  const std::string schedule = obj.value("schedule", std::string("fixed"));
  if (schedule == "fixed") {
    d.schedule = FixedLength{};
  } else if (schedule == "dynamic") {
    d.schedule = DynamicLength{};
  } else {
    config_error("schedule must be 'fixed' or 'dynamic'");
  }
  if (obj.contains("stop_token") && !obj["stop_token"].is_null()) {
    d.stop_token = obj["stop_token"].get<TokenId>();
  }
  return d;
}

CorpusSource parse_corpus_source(const json& value, const std::filesystem::path& base) {
  if (value.is_string()) return resolve(base, value.get<std::string>());
  allow_keys(value, "corpus", {"synthetic"});
  const json& s = value.at("synthetic");
  allow_keys(s, "corpus.synthetic",
             {"seed", "count", "vocab_size", "min_length", "max_length", "train_fraction"});
  SyntheticCorpusSpec spec;
  spec.seed = s.value("seed", spec.seed);
  spec.count = s.value("count", spec.count);
  spec.vocab_size = s.value("vocab_size", spec.vocab_size);
  spec.min_length = s.value("min_length", spec.min_length);
  spec.max_length = s.value("max_length", spec.max_length);
  spec.train_fraction = s.value("train_fraction", spec.train_fraction);
  return spec;
}

TuningConfig parse_tuning(const json& obj) {
  allow_keys(obj, "tuning",
             {"dev_size", "length_grid", "length_policy", "kind", "dev_sizes", "trials"});
  TuningConfig t;
  t.dev_size = obj.value("dev_size", t.dev_size);
  t.length_grid = obj.value("length_grid", t.length_grid);
  if (obj.contains("length_policy")) {
    t.length_policy = parse_policy(obj["length_policy"].get<std::string>());
  }
  if (obj.contains("kind")) {
    const auto kind = parse_divergence_kind(obj["kind"].get<std::string>());
    if (!kind) config_error("unknown divergence kind");
    t.kind = *kind;
  }
  t.dev_sizes = obj.value("dev_sizes", t.dev_sizes);
  t.trials = obj.value("trials", t.trials);
  return t;
}

}  // namespace

AcceptancePolicy parse_policy(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view head = text.substr(0, colon);
  const std::string_view arg =
      colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  auto kind_arg = [&]() {
    if (arg.empty()) return DivergenceKind::kJS;
    const auto kind = parse_divergence_kind(arg);
    if (!kind) config_error("unknown divergence kind in policy '" + std::string(text) + "'");
    return *kind;
  };
  if (head == "SD" && arg.empty()) return policy::SD{};
  if (head == "FSD") return policy::FSD{kind_arg(), 0.0};
  if (head == "rFSD") return policy::RFSD{kind_arg(), 0.0};
  if (head == "TargetOnly" && arg.empty()) return policy::TargetOnly{};
  if (head == "DraftOnly" && arg.empty()) return policy::DraftOnly{};
  if (head == "Random") {
    try {
      std::size_t used = 0;
      const double rate = std::stod(std::string(arg), &used);
      if (used == arg.size() && rate >= 0.0 && rate <= 1.0) return policy::Random{rate};
    } catch (const std::exception&) {
    }
  }
  config_error("unknown policy '" + std::string(text) + "'");
}

std::string policy_label(const AcceptancePolicy& policy) {
  if (const auto* r = std::get_if<policy::Random>(&policy)) {
    std::ostringstream out;
    out << "Random@" << r->rate;
    return out.str();
  }
  return policy_name(policy);
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    config_error(e.what());
  }
  try {
    allow_keys(doc, "config",
               {"models", "policies", "thresholds", "candidate_lengths", "drafting",
                "max_new_tokens", "seeds", "corpus", "split", "output_dir", "cost_ratio",
                "workers", "tuning"});
    ExperimentConfig cfg;
    if (doc.contains("models")) cfg.models = parse_models(doc["models"], base_dir);
    for (const auto& p : doc.value("policies", std::vector<std::string>{"SD"})) {
      cfg.policies.push_back(parse_policy(p));
    }
    cfg.thresholds = doc.value("thresholds", std::vector<double>{0.0});
    cfg.candidate_lengths = doc.value("candidate_lengths", std::vector<std::size_t>{5});
    if (doc.contains("drafting")) cfg.drafting = parse_drafting(doc["drafting"]);
    cfg.max_new_tokens = doc.value("max_new_tokens", cfg.max_new_tokens);
    cfg.seeds = doc.value("seeds", cfg.seeds);
    if (doc.contains("corpus")) cfg.corpus = parse_corpus_source(doc["corpus"], base_dir);
    const std::string split = doc.value("split", std::string("test"));
    if (split != "train" && split != "test") config_error("split must be 'train' or 'test'");
    cfg.split = split == "train" ? Split::kTrain : Split::kTest;
    cfg.output_dir = resolve(base_dir, doc.value("output_dir", std::string("out")));
    cfg.cost_ratio = doc.value("cost_ratio", cfg.cost_ratio);
    cfg.workers = doc.value("workers", cfg.workers);
    if (doc.contains("tuning")) cfg.tuning = parse_tuning(doc["tuning"]);
    validate(cfg);
    return cfg;
  } catch (const json::exception& e) {
    config_error(e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path());
}

void validate(const ExperimentConfig& config) {
  if (config.policies.empty()) config_error("policies must be non-empty");
  if (config.thresholds.empty()) config_error("thresholds must be non-empty");
  if (config.candidate_lengths.empty()) config_error("candidate_lengths must be non-empty");
  if (config.seeds.empty()) config_error("seeds must be non-empty");
  if (std::set<std::uint64_t>(config.seeds.begin(), config.seeds.end()).size() !=
      config.seeds.size()) {
    config_error("seeds must be distinct");
  }
  for (double t : config.thresholds) {
    if (!(t >= 0.0)) config_error("thresholds must be >= 0");
  }
  for (std::size_t l : config.candidate_lengths) {
    if (l == 0) config_error("candidate lengths must be >= 1");
  }
  if (!(config.cost_ratio >= 0.0)) config_error("cost_ratio must be >= 0");
  if (config.workers == 0) config_error("workers must be >= 1");
  for (const auto& p : config.policies) fuzzyspec::validate(p);
  fuzzyspec::validate(config.drafting);
  if (config.tuning.length_grid.empty() || config.tuning.dev_sizes.empty()) {
    config_error("tuning grids must be non-empty");
  }
  if (config.tuning.trials == 0) config_error("tuning.trials must be >= 1");
}

Corpus resolve_corpus(const CorpusSource& source) {
  if (const auto* path = std::get_if<std::filesystem::path>(&source)) return load_corpus(*path);
  return generate_corpus(std::get<SyntheticCorpusSpec>(source));
}

ModelProvider::ModelProvider(const ModelSource& source) : source_(source) {
  if (const auto* s = std::get_if<SyntheticModels>(&source_)) {
    auto [target, draft] = generate_pair(s->spec);
    shared_.target = std::make_shared<const TableModel>(std::move(target));
    shared_.draft = std::make_shared<const TableModel>(std::move(draft));
  } else if (const auto* t = std::get_if<TableFiles>(&source_)) {
    shared_.target = std::make_shared<const TableModel>(load_table_model(t->target));
    shared_.draft = std::make_shared<const TableModel>(load_table_model(t->draft));
  }
  if (shared_.target) {
    if (shared_.target->vocab_size() != shared_.draft->vocab_size()) {
      throw Error(ErrorCode::kVocabMismatch, "target and draft vocabularies differ");
    }
    vocab_size_ = shared_.target->vocab_size();
  } else {
    vocab_size_ = std::get<RemoteEndpoints>(source_).target.vocab_size;
  }
}

ModelPair ModelProvider::acquire() const {
  if (const auto* r = std::get_if<RemoteEndpoints>(&source_)) {
    return ModelPair{std::make_shared<const RemoteModel>(r->target),
                     std::make_shared<const RemoteModel>(r->draft)};
  }
  return shared_;
}

}  // namespace fuzzyspec::harness
