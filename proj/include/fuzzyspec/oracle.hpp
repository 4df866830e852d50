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

#ifndef FUZZYSPEC_ORACLE_HPP
#define FUZZYSPEC_ORACLE_HPP

/** @file
 * Exact sequence-level distributions of the decoding processes.
 *
 * Every routine enumerates the full tree of continuations of length N and
 * refuses (kEnumerationTooLarge) when vocab_size^N exceeds
 * kMaxEnumeratedSequences; nothing here falls back to sampling except the
 * random-mask expectation in compare_random_baseline, and only when the
 * mask space itself is too large.
 *
 * The fuzzy process is enumerated with sampled drafting at temperature 1:
 * at a candidate slot whose prefix passes the divergence test the token
 * follows the draft distribution; otherwise, and at bonus slots, it follows
 * the target. Because the test depends only on the prefix, the block slot of
 * every prefix is deterministic and the process is a plain autoregressive
 * model with a prefix-dependent "effective" next-token law.
 */

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "fuzzyspec/divergence.hpp"
#include "fuzzyspec/model.hpp"
#include "fuzzyspec/prob.hpp"
#include "fuzzyspec/rng.hpp"

namespace fuzzyspec {

inline constexpr double kMaxEnumeratedSequences = 1e6;

/// Distribution over generated continuations of a fixed length. Only
/// reachable sequences (positive probability) are stored.
struct SequenceDist {
  std::size_t vocab_size = 0;
  std::size_t length = 0;
  std::map<TokenSeq, double> probs;

  double total() const;
  double at(const TokenSeq& seq) const;
};

SequenceDist enumerate_target_dist(const ModelBackend& target,
                                   std::span<const TokenId> prompt, std::size_t length);

/// Ancestral distribution of the draft model alone.
SequenceDist enumerate_draft_dist(const ModelBackend& draft,
                                  std::span<const TokenId> prompt, std::size_t length);

struct FuzzyProcess {
  DivergenceKind kind = DivergenceKind::kJS;
  double threshold = 0.0;
  std::size_t block_length = 1;
  bool bonus_token = true;
};

SequenceDist enumerate_fsd_dist(const ModelBackend& target, const ModelBackend& draft,
                                std::span<const TokenId> prompt, std::size_t length,
                                const FuzzyProcess& process);

/// Block-structured speculative sampling with the acceptance draws
/// integrated out: from each candidate slot the process either accepts the
/// draft token (mass pD(x) min(1, pT(x)/pD(x))) and moves on, or rejects and
/// restarts the block with a residual token.
SequenceDist enumerate_sd_dist(const ModelBackend& target, const ModelBackend& draft,
                               std::span<const TokenId> prompt, std::size_t length,
                               std::size_t block_length, bool bonus_token = true);

/// Divergence between two sequence distributions, each full sequence being
/// one outcome. Argument order follows the per-token functions.
double sequence_divergence(DivergenceKind kind, const SequenceDist& a, const SequenceDist& b);

struct BoundReport {
  DivergenceKind kind = DivergenceKind::kKL;
  std::size_t length = 0;
  double threshold = 0.0;
  /// Div(P_target, P_fsd) over whole sequences.
  double exact = 0.0;
  /// length * p_use * threshold.
  double bound = 0.0;
  double slack = 0.0;
  /// Mean over steps of p_use_per_step.
  double p_use = 0.0;
  /// Target-measure probability that step t draws from the draft.
  std::vector<double> p_use_per_step;
  /// Target-measure expectation of the per-step divergence between the
  /// target and the effective law. For KL these sum to `exact`.
  std::vector<double> step_terms;
  double step_terms_sum = 0.0;
  /// Expected fraction of draft-sourced tokens under the fuzzy process.
  double realized_draft_fraction = 0.0;

  bool bound_holds() const { return slack >= 0.0; }
  /// step_terms[t] <= p_use_per_step[t] * threshold for every t.
  bool steps_within_bound(double tolerance = 1e-12) const;
};

BoundReport check_bound(const ModelBackend& target, const ModelBackend& draft,
                        std::span<const TokenId> prompt, std::size_t length,
                        const FuzzyProcess& process);

struct RandomBaselineReport {
  DivergenceKind kind = DivergenceKind::kJS;
  double threshold = 0.0;
  /// Div(P_target, P_fsd) with a single block spanning the sequence.
  double fsd_divergence = 0.0;
  /// Expected fraction of positions the fuzzy process takes from the draft.
  double draft_fraction = 0.0;
  /// E over independent Bernoulli(draft_fraction) masks of
  /// Div(P_target, P_mask).
  double random_divergence = 0.0;
  std::size_t masks_evaluated = 0;
  bool masks_exhaustive = true;

  bool fsd_dominates() const { return fsd_divergence <= random_divergence; }
};

/// Masks are enumerated exhaustively when 2^length <= 4096; otherwise
/// `mask_samples` masks are drawn from `rng`.
RandomBaselineReport compare_random_baseline(const ModelBackend& target,
                                             const ModelBackend& draft,
                                             std::span<const TokenId> prompt,
                                             std::size_t length, DivergenceKind kind,
                                             double threshold, std::size_t mask_samples,
                                             Rng& rng);

/// Sequence distribution of a process that takes position t from the draft
/// iff mask[t] is true and from the target otherwise.
SequenceDist enumerate_masked_dist(const ModelBackend& target, const ModelBackend& draft,
                                   std::span<const TokenId> prompt,
                                   const std::vector<bool>& mask);

}  // namespace fuzzyspec

#endif  // FUZZYSPEC_ORACLE_HPP
