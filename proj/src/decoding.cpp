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

#include "fuzzyspec/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fuzzyspec/error.hpp"

namespace fuzzyspec {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void validate_mode(const SamplingMode& mode) {
  if (const auto* s = std::get_if<Sampled>(&mode)) {
    if (!(s->temperature > 0.0) || !std::isfinite(s->temperature)) {
      throw Error(ErrorCode::kNonPositiveTemperature, "sampling temperature must be positive");
    }
  }
}

/// The distribution a sampling mode actually draws from.
ProbDist effective(const ProbDist& dist, const SamplingMode& mode) {
  if (const auto* s = std::get_if<Sampled>(&mode)) {
    return apply_temperature(dist, s->temperature);
  }
  return dist;
}

TokenId pick(const ProbDist& dist, const SamplingMode& mode, Rng& rng) {
  return std::holds_alternative<Greedy>(mode) ? argmax(dist) : sample(dist, rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// Policies

void validate(const AcceptancePolicy& policy) {
  std::visit(Overloaded{
                 [](const policy::FSD& p) {
                   if (!(p.threshold >= 0.0)) {
                     throw Error(ErrorCode::kInvalidArgument, "FSD threshold must be >= 0");
                   }
                 },
                 [](const policy::RFSD& p) {
                   if (!(p.threshold >= 0.0)) {
                     throw Error(ErrorCode::kInvalidArgument, "rFSD threshold must be >= 0");
                   }
                 },
                 [](const policy::Random& p) {
                   if (!(p.rate >= 0.0 && p.rate <= 1.0)) {
                     throw Error(ErrorCode::kInvalidArgument, "random rate must lie in [0, 1]");
                   }
                 },
                 [](const auto&) {},
             },
             policy);
}

std::string policy_name(const AcceptancePolicy& policy) {
  return std::visit(Overloaded{
                        [](const policy::SD&) { return std::string("SD"); },
                        [](const policy::FSD&) { return std::string("FSD"); },
                        [](const policy::RFSD&) { return std::string("rFSD"); },
                        [](const policy::Random&) { return std::string("Random"); },
                        [](const policy::TargetOnly&) { return std::string("TargetOnly"); },
                        [](const policy::DraftOnly&) { return std::string("DraftOnly"); },
                    },
                    policy);
}

std::optional<DivergenceKind> policy_kind(const AcceptancePolicy& policy) {
  if (const auto* p = std::get_if<policy::FSD>(&policy)) return p->kind;
  if (const auto* p = std::get_if<policy::RFSD>(&policy)) return p->kind;
  return std::nullopt;
}

double policy_parameter(const AcceptancePolicy& policy) {
  if (const auto* p = std::get_if<policy::FSD>(&policy)) return p->threshold;
  if (const auto* p = std::get_if<policy::RFSD>(&policy)) return p->threshold;
  if (const auto* p = std::get_if<policy::Random>(&policy)) return p->rate;
  return 0.0;
}

AcceptancePolicy with_threshold(const AcceptancePolicy& policy, double threshold) {
  AcceptancePolicy out = policy;
  if (auto* p = std::get_if<policy::FSD>(&out)) p->threshold = threshold;
  if (auto* p = std::get_if<policy::RFSD>(&out)) p->threshold = threshold;
  return out;
}

void validate(const DraftingConfig& cfg) {
  if (cfg.candidate_length == 0) {
    throw Error(ErrorCode::kInvalidArgument, "candidate length must be >= 1");
  }
  if (const auto* d = std::get_if<DynamicLength>(&cfg.schedule)) {
    if (d->min_length == 0 || d->min_length > d->max_length) {
      throw Error(ErrorCode::kInvalidArgument, "dynamic length bounds must satisfy 1 <= min <= max");
    }
  }
  validate_mode(cfg.draft_mode);
  validate_mode(cfg.rejection_sampling);
}

// ---------------------------------------------------------------------------
// Acceptance primitives

double sd_accept_prob(double target_prob, double draft_prob) {
  if (!(draft_prob > 0.0)) {
    throw Error(ErrorCode::kZeroDraftProbability, "candidate has zero draft probability");
  }
  return std::min(1.0, target_prob / draft_prob);
}

ProbDist residual_dist(const ProbDist& target, const ProbDist& draft) {
  if (target.size() != draft.size()) {
    throw Error(ErrorCode::kVocabMismatch, "residual of distributions of different sizes");
  }
  if (target == draft) {
    throw Error(ErrorCode::kDegenerateResidual, "target and draft are identical");
  }
  const Eigen::VectorXd positive = (target.probs() - draft.probs()).cwiseMax(0.0);
  if (!(positive.sum() > 0.0)) {
    throw Error(ErrorCode::kDegenerateResidual, "residual has no positive mass");
  }
  return normalize(positive);
}

AcceptDecision decide_acceptance(const AcceptancePolicy& policy, const ProbDist& target,
                                 const ProbDist& draft, TokenId candidate, Rng& rng) {
  if (candidate >= target.size() || target.size() != draft.size()) {
    throw Error(ErrorCode::kTokenOutOfRange, "candidate outside vocabulary");
  }
  return std::visit(
      Overloaded{
          [&](const policy::SD&) {
            const double y = rng.uniform();
            const bool ok = sd_accept_prob(target[candidate], draft[candidate]) > y;
            return AcceptDecision{ok, ResampleFrom::kResidual};
          },
          [&](const policy::FSD& p) {
            const bool ok = below_threshold(p.kind, target, draft, p.threshold);
            return AcceptDecision{ok, ResampleFrom::kTarget};
          },
          [&](const policy::RFSD& p) {
            // Draw first, always, so the stream matches SD step for step.
            const double y = rng.uniform();
            const bool sd_ok = sd_accept_prob(target[candidate], draft[candidate]) > y;
            const bool ok = below_threshold(p.kind, target, draft, p.threshold) || sd_ok;
            return AcceptDecision{ok, ResampleFrom::kResidual};
          },
          [&](const policy::Random& p) {
            const double y = rng.uniform();
            return AcceptDecision{y < p.rate, ResampleFrom::kTarget};
          },
          [](const auto&) -> AcceptDecision {
            throw Error(ErrorCode::kInvalidArgument,
                        "single-model baselines have no acceptance rule");
          },
      },
      policy);
}

// ---------------------------------------------------------------------------
// Traces and metrics

std::string_view to_string(TokenSource source) {
  switch (source) {
    case TokenSource::kDraft: return "draft";
    case TokenSource::kTargetResample: return "target-resample";
    case TokenSource::kTargetBonus: return "target-bonus";
  }
  return "?";
}

std::size_t BlockRecord::accepted_count() const {
  return static_cast<std::size_t>(std::count_if(
      candidates.begin(), candidates.end(), [](const CandidateRecord& c) { return c.accepted; }));
}

double RunMetrics::acceptance_length() const {
  return blocks == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(blocks);
}

double RunMetrics::acceptance_pct() const {
  return proposed == 0 ? 0.0 : 100.0 * static_cast<double>(accepted) / static_cast<double>(proposed);
}

double RunMetrics::pct_from_draft() const {
  return tokens == 0 ? 0.0 : static_cast<double>(draft_tokens) / static_cast<double>(tokens);
}

double RunMetrics::target_calls_per_token() const {
  return tokens == 0 ? 0.0 : static_cast<double>(target_calls) / static_cast<double>(tokens);
}

double RunMetrics::proxy_speed(double cost_ratio) const {
  const double cost = static_cast<double>(target_calls) +
                      static_cast<double>(draft_calls) * cost_ratio;
  return cost > 0.0 ? static_cast<double>(tokens) / cost : 0.0;
}

RunMetrics& RunMetrics::operator+=(const RunMetrics& other) {
  tokens += other.tokens;
  blocks += other.blocks;
  proposed += other.proposed;
  accepted += other.accepted;
  draft_tokens += other.draft_tokens;
  draft_calls += other.draft_calls;
  target_calls += other.target_calls;
  return *this;
}

RunMetrics compute_metrics(const DecodeTrace& trace) {
  RunMetrics m;
  m.blocks = trace.blocks.size();
  m.draft_calls = trace.draft_calls;
  m.target_calls = trace.target_calls;
  for (const BlockRecord& block : trace.blocks) {
    m.tokens += block.emitted.size();
    m.proposed += block.candidates.size();
    m.accepted += block.accepted_count();
    m.draft_tokens += static_cast<std::size_t>(
        std::count(block.sources.begin(), block.sources.end(), TokenSource::kDraft));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Decode loop

namespace {

class Session {
 public:
  Session(const ModelBackend& target, const ModelBackend& draft,
          std::span<const TokenId> prompt, const AcceptancePolicy& policy,
          const DraftingConfig& cfg, std::size_t max_new_tokens, Rng& rng)
      : target_(target),
        draft_(draft),
        policy_(policy),
        cfg_(cfg),
        max_new_tokens_(max_new_tokens),
        rng_(rng),
        sequence_(prompt.begin(), prompt.end()),
        prompt_length_(prompt.size()),
        length_(cfg.candidate_length) {}

  DecodeResult run() {
    while (produced() < max_new_tokens_ && !stopped_) {
      const std::size_t index = result_.trace.blocks.size();
      try {
        if (std::holds_alternative<policy::TargetOnly>(policy_)) {
          target_block();
        } else if (std::holds_alternative<policy::DraftOnly>(policy_)) {
          draft_block();
        } else {
          speculative_block();
        }
      } catch (const Error& e) {
        throw Error(e.code(), e.message() + " [block " + std::to_string(index) +
                                  ", context length " + std::to_string(sequence_.size()) + "]");
      }
    }
    result_.tokens.assign(sequence_.begin() + static_cast<std::ptrdiff_t>(prompt_length_),
                          sequence_.end());
    return std::move(result_);
  }

 private:
  std::size_t produced() const { return sequence_.size() - prompt_length_; }

  void emit(BlockRecord& block, TokenId token, TokenSource source) {
    sequence_.push_back(token);
    block.emitted.push_back(token);
    block.sources.push_back(source);
    if (cfg_.stop_token && *cfg_.stop_token == token) stopped_ = true;
  }

  /// Proposes up to `count` draft tokens after the current sequence; returns
  /// the effective draft distribution for each proposal.
  std::vector<ProbDist> propose(std::size_t count, TokenSeq& candidates) {
    std::vector<ProbDist> dists;
    TokenSeq context = sequence_;
    for (std::size_t i = 0; i < count; ++i) {
      ProbDist raw = draft_.next_dist(context);
      ++result_.trace.draft_calls;
      ProbDist eff = effective(raw, cfg_.draft_mode);
      const TokenId token =
          std::holds_alternative<Greedy>(cfg_.draft_mode) ? argmax(raw) : sample(eff, rng_);
      candidates.push_back(token);
      context.push_back(token);
      dists.push_back(std::move(eff));
      if (cfg_.stop_token && *cfg_.stop_token == token) break;
    }
    return dists;
  }

  void target_block() {
    BlockRecord block;
    block.context_length = sequence_.size();
    const ProbDist dist = effective(target_.next_dist(sequence_), cfg_.rejection_sampling);
    ++result_.trace.target_calls;
    emit(block, pick(dist, cfg_.rejection_sampling, rng_), TokenSource::kTargetResample);
    block.end = BlockEnd::kResample;
    result_.trace.blocks.push_back(std::move(block));
  }

  void draft_block() {
    BlockRecord block;
    block.context_length = sequence_.size();
    TokenSeq candidates;
    propose(std::min(length_, max_new_tokens_ - produced()), candidates);
    for (TokenId token : candidates) {
      block.candidates.push_back(CandidateRecord{token, 0.0, 1.0, true});
      emit(block, token, TokenSource::kDraft);
    }
    block.end = BlockEnd::kEndOfGeneration;
    result_.trace.blocks.push_back(std::move(block));
  }

  void speculative_block() {
    BlockRecord block;
    block.context_length = sequence_.size();

    TokenSeq candidates;
    const std::vector<ProbDist> draft_dists =
        propose(std::min(length_, max_new_tokens_ - produced()), candidates);
    const std::size_t k = candidates.size();

    TokenSeq verify_context = sequence_;
    verify_context.insert(verify_context.end(), candidates.begin(), candidates.end());
    const std::vector<ProbDist> raw_target =
        target_.next_dists(verify_context, sequence_.size() - 1);
    ++result_.trace.target_calls;
    if (raw_target.size() != k + 1) {
      throw Error(ErrorCode::kProtocolViolation, "target returned the wrong number of rows");
    }
    std::vector<ProbDist> target_dists;
    target_dists.reserve(k + 1);
    for (const ProbDist& d : raw_target) {
      target_dists.push_back(effective(d, cfg_.rejection_sampling));
    }

    const DivergenceKind kind = policy_kind(policy_).value_or(DivergenceKind::kJS);
    std::optional<TokenSource> terminator;
    std::optional<TokenId> terminator_token;
    for (std::size_t i = 0; i < k; ++i) {
      const ProbDist& pt = target_dists[i];
      const ProbDist& pd = draft_dists[i];
      const TokenId x = candidates[i];
      CandidateRecord record;
      record.token = x;
      record.divergence = divergence(kind, pt, pd);
      record.sd_accept_prob = pd[x] > 0.0 ? std::min(1.0, pt[x] / pd[x])
                                          : std::numeric_limits<double>::quiet_NaN();
      if (block.first_rejection) {
        block.candidates.push_back(record);
        continue;
      }
      const AcceptDecision decision = decide_acceptance(policy_, pt, pd, x, rng_);
      record.accepted = decision.accepted;
      block.candidates.push_back(record);
      if (decision.accepted) continue;

      block.first_rejection = i;
      const ProbDist resample = decision.resample_from == ResampleFrom::kResidual
                                    ? residual_dist(pt, pd)
                                    : pt;
      terminator_token = pick(resample, cfg_.rejection_sampling, rng_);
      terminator = TokenSource::kTargetResample;
    }

    const std::size_t accepted = block.first_rejection.value_or(k);
    for (std::size_t i = 0; i < accepted; ++i) emit(block, candidates[i], TokenSource::kDraft);

    if (terminator) {
      emit(block, *terminator_token, *terminator);
      block.end = BlockEnd::kResample;
    } else if (cfg_.bonus_token && !stopped_ && produced() < max_new_tokens_) {
      emit(block, pick(target_dists[k], cfg_.rejection_sampling, rng_),
           TokenSource::kTargetBonus);
      block.end = BlockEnd::kBonus;
    } else {
      block.end = BlockEnd::kEndOfGeneration;
    }

    if (const auto* dyn = std::get_if<DynamicLength>(&cfg_.schedule)) {
      if (block.first_rejection) {
        length_ = length_ > dyn->min_length + dyn->decrease_on_reject
                      ? length_ - dyn->decrease_on_reject
                      : dyn->min_length;
      } else if (k == length_) {
        length_ = std::min(dyn->max_length, length_ + dyn->increase_on_full_accept);
      }
    }
    result_.trace.blocks.push_back(std::move(block));
  }

  const ModelBackend& target_;
  const ModelBackend& draft_;
  const AcceptancePolicy& policy_;
  const DraftingConfig& cfg_;
  std::size_t max_new_tokens_;
  Rng& rng_;
  TokenSeq sequence_;
  std::size_t prompt_length_;
  std::size_t length_;
  bool stopped_ = false;
  DecodeResult result_;
};

}  // namespace

DecodeResult decode(const ModelBackend& target, const ModelBackend& draft,
                    std::span<const TokenId> prompt, const AcceptancePolicy& policy,
                    const DraftingConfig& cfg, std::size_t max_new_tokens, Rng& rng) {
  validate(policy);
  validate(cfg);
  if (prompt.empty()) throw Error(ErrorCode::kInvalidArgument, "prompt must be non-empty");
  if (target.vocab_size() != draft.vocab_size()) {
    throw Error(ErrorCode::kVocabMismatch, "target and draft vocabularies differ");
  }
  for (TokenId t : prompt) {
    if (t >= target.vocab_size()) {
      throw Error(ErrorCode::kTokenOutOfRange, "prompt token " + std::to_string(t));
    }
  }
  return Session(target, draft, prompt, policy, cfg, max_new_tokens, rng).run();
}

}  // namespace fuzzyspec
