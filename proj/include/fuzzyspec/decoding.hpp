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

#ifndef FUZZYSPEC_DECODING_HPP
#define FUZZYSPEC_DECODING_HPP

/** @file
 * Draft/verify decoding with pluggable acceptance rules.
 *
 * A block is one draft proposal of up to L candidates followed by a single
 * batched target evaluation. Candidates are inspected in order and the
 * block is cut at the first rejection, which emits a replacement token; a
 * fully accepted block may emit a bonus token sampled from the target.
 *
 * Uniform-draw protocol (fixed so that runs of different policies can share
 * a seed): drafting in sampled mode takes one draw per candidate; SD, rFSD
 * and Random take exactly one draw per candidate inspected; plain FSD takes
 * none; every sampled replacement or bonus token takes one draw. Greedy
 * modes take no draws.
 */

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fuzzyspec/divergence.hpp"
#include "fuzzyspec/model.hpp"
#include "fuzzyspec/prob.hpp"
#include "fuzzyspec/rng.hpp"

namespace fuzzyspec {

// ---------------------------------------------------------------------------
// Policies

namespace policy {

/// Standard speculative sampling: accept with min(1, pT/pD), resample from
/// the residual on rejection.
struct SD {};

/// Accept iff Div(pT, pD) < threshold; sample from the target on rejection.
struct FSD {
  DivergenceKind kind = DivergenceKind::kJS;
  double threshold = 0.0;
};

/// Accept iff the FSD test or the SD test passes; residual on rejection.
struct RFSD {
  DivergenceKind kind = DivergenceKind::kJS;
  double threshold = 0.0;
};

/// Content-blind acceptance with a fixed rate; target on rejection.
struct Random {
  double rate = 0.0;
};

/// Plain ancestral sampling from the target, one call per token.
struct TargetOnly {};

/// Plain ancestral sampling from the draft; no target calls.
struct DraftOnly {};

}  // namespace policy

using AcceptancePolicy = std::variant<policy::SD, policy::FSD, policy::RFSD,
                                      policy::Random, policy::TargetOnly,
                                      policy::DraftOnly>;

/// Throws kInvalidArgument for a negative threshold or a rate outside [0, 1].
void validate(const AcceptancePolicy& policy);

/// Short names: SD, FSD, rFSD, Random, TargetOnly, DraftOnly.
std::string policy_name(const AcceptancePolicy& policy);

/// Divergence kind of FSD/rFSD, or nullopt.
std::optional<DivergenceKind> policy_kind(const AcceptancePolicy& policy);

/// Threshold of FSD/rFSD, rate of Random, 0 otherwise.
double policy_parameter(const AcceptancePolicy& policy);

/// Copy of the policy with its threshold replaced (FSD/rFSD only).
AcceptancePolicy with_threshold(const AcceptancePolicy& policy, double threshold);

// ---------------------------------------------------------------------------
// Configuration

struct Greedy {};
struct Sampled {
  double temperature = 1.0;
};
using SamplingMode = std::variant<Greedy, Sampled>;

struct FixedLength {};
struct DynamicLength {
  std::size_t increase_on_full_accept = 2;
  std::size_t decrease_on_reject = 1;
  std::size_t min_length = 1;
  std::size_t max_length = 32;
};
using LengthSchedule = std::variant<FixedLength, DynamicLength>;

struct DraftingConfig {
  std::size_t candidate_length = 5;
  LengthSchedule schedule = FixedLength{};
  SamplingMode draft_mode = Greedy{};
  SamplingMode rejection_sampling = Sampled{1.0};
  bool bonus_token = true;
  std::optional<TokenId> stop_token;
};

void validate(const DraftingConfig& cfg);

// ---------------------------------------------------------------------------
// Acceptance primitives

/// min(1, pT(x) / pD(x)); kZeroDraftProbability when pD(x) = 0.
double sd_accept_prob(double target_prob, double draft_prob);

/// Normalised positive part of pT - pD; kDegenerateResidual when pT == pD.
ProbDist residual_dist(const ProbDist& target, const ProbDist& draft);

enum class ResampleFrom { kTarget, kResidual };

struct AcceptDecision {
  bool accepted = false;
  /// Meaningful only when !accepted.
  ResampleFrom resample_from = ResampleFrom::kTarget;

  friend bool operator==(const AcceptDecision&, const AcceptDecision&) = default;
};

/// One candidate decision under `policy`. Consumes one uniform draw for
/// SD/rFSD/Random and none for FSD. Only speculative policies are valid.
AcceptDecision decide_acceptance(const AcceptancePolicy& policy,
                                 const ProbDist& target, const ProbDist& draft,
                                 TokenId candidate, Rng& rng);

// ---------------------------------------------------------------------------
// Traces and metrics

enum class TokenSource { kDraft, kTargetResample, kTargetBonus };

std::string_view to_string(TokenSource source);

struct CandidateRecord {
  TokenId token = 0;
  /// Divergence at this position (policy kind, JS for kind-less policies).
  double divergence = 0.0;
  /// min(1, pT/pD) for the candidate; NaN when pD(x) = 0.
  double sd_accept_prob = 0.0;
  bool accepted = false;
};

enum class BlockEnd { kResample, kBonus, kEndOfGeneration };

struct BlockRecord {
  std::size_t context_length = 0;
  std::vector<CandidateRecord> candidates;
  std::optional<std::size_t> first_rejection;
  BlockEnd end = BlockEnd::kEndOfGeneration;
  /// Tokens emitted by the block, in order, and where each came from.
  std::vector<TokenId> emitted;
  std::vector<TokenSource> sources;

  std::size_t accepted_count() const;
};

struct DecodeTrace {
  std::vector<BlockRecord> blocks;
  std::size_t draft_calls = 0;
  std::size_t target_calls = 0;
};

struct DecodeResult {
  TokenSeq tokens;  // generated tokens only, prompt excluded
  DecodeTrace trace;
};

/// Counts are additive; ratios are derived from the counts so that runs over
/// many prompts aggregate by summing.
struct RunMetrics {
  std::size_t tokens = 0;
  std::size_t blocks = 0;
  std::size_t proposed = 0;
  std::size_t accepted = 0;
  std::size_t draft_tokens = 0;
  std::size_t draft_calls = 0;
  std::size_t target_calls = 0;

  /// Mean accepted candidates per block.
  double acceptance_length() const;
  /// Accepted / proposed, in percent.
  double acceptance_pct() const;
  /// Fraction of emitted tokens that came from the draft.
  double pct_from_draft() const;
  double target_calls_per_token() const;
  /// tokens / (target_calls + draft_calls * cost_ratio).
  double proxy_speed(double cost_ratio) const;

  RunMetrics& operator+=(const RunMetrics& other);
  friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

RunMetrics compute_metrics(const DecodeTrace& trace);

// ---------------------------------------------------------------------------
// Decode loop

/// Generates up to `max_new_tokens` tokens after `prompt`. Backend errors are
/// rethrown with the block index and context length attached.
DecodeResult decode(const ModelBackend& target, const ModelBackend& draft,
                    std::span<const TokenId> prompt, const AcceptancePolicy& policy,
                    const DraftingConfig& cfg, std::size_t max_new_tokens, Rng& rng);

}  // namespace fuzzyspec

#endif  // FUZZYSPEC_DECODING_HPP
