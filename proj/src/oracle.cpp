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

#include "fuzzyspec/oracle.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "fuzzyspec/decoding.hpp"
#include "fuzzyspec/error.hpp"

namespace fuzzyspec {

double SequenceDist::total() const {
  double sum = 0.0;
  for (const auto& [_, p] : probs) sum += p;
  return sum;
}

double SequenceDist::at(const TokenSeq& seq) const {
  const auto it = probs.find(seq);
  return it == probs.end() ? 0.0 : it->second;
}

bool BoundReport::steps_within_bound(double tolerance) const {
  for (std::size_t t = 0; t < step_terms.size(); ++t) {
    if (step_terms[t] > p_use_per_step[t] * threshold + tolerance) return false;
  }
  return true;
}

namespace {

struct Transition {
  TokenId token;
  double prob;
  std::size_t next_slot;
};

void check_enumerable(std::size_t vocab_size, std::size_t length) {
  const double count = std::pow(static_cast<double>(vocab_size), static_cast<double>(length));
  if (count > kMaxEnumeratedSequences) {
    throw Error(ErrorCode::kEnumerationTooLarge,
                std::to_string(vocab_size) + "^" + std::to_string(length) +
                    " sequences exceed the enumeration cap");
  }
}

TokenSeq join(std::span<const TokenId> prompt, const TokenSeq& prefix) {
  TokenSeq ctx(prompt.begin(), prompt.end());
  ctx.insert(ctx.end(), prefix.begin(), prefix.end());
  return ctx;
}

/// Breadth-first expansion over (generated prefix, block slot) states.
template <typename Step>
SequenceDist run_process(std::size_t vocab_size, std::span<const TokenId> prompt,
                         std::size_t length, Step&& step) {
  check_enumerable(vocab_size, length);
  if (prompt.empty()) throw Error(ErrorCode::kInvalidArgument, "prompt must be non-empty");
  using State = std::pair<TokenSeq, std::size_t>;
  std::map<State, double> layer{{State{TokenSeq{}, 0}, 1.0}};
  for (std::size_t t = 0; t < length; ++t) {
    std::map<State, double> next;
    for (const auto& [state, mass] : layer) {
      const auto& [prefix, slot] = state;
      for (const Transition& tr : step(join(prompt, prefix), slot)) {
        if (tr.prob <= 0.0) continue;
        TokenSeq extended = prefix;
        extended.push_back(tr.token);
        next[State{std::move(extended), tr.next_slot}] += mass * tr.prob;
      }
    }
    layer = std::move(next);
  }
  SequenceDist out;
  out.vocab_size = vocab_size;
  out.length = length;
  for (const auto& [state, mass] : layer) out.probs[state.first] += mass;
  return out;
}

std::vector<Transition> spread(const ProbDist& dist, std::size_t next_slot) {
  std::vector<Transition> out;
  for (std::size_t x = 0; x < dist.size(); ++x) {
    const double p = dist[static_cast<TokenId>(x)];
    if (p > 0.0) out.push_back({static_cast<TokenId>(x), p, next_slot});
  }
  return out;
}

void check_pair(const ModelBackend& target, const ModelBackend& draft) {
  if (target.vocab_size() != draft.vocab_size()) {
    throw Error(ErrorCode::kVocabMismatch, "target and draft vocabularies differ");
  }
}

std::size_t after_candidate(std::size_t slot, const FuzzyProcess& process) {
  const std::size_t next = slot + 1;
  if (next < process.block_length) return next;
  return process.bonus_token ? process.block_length : 0;
}

/// Effective next-token law of the fuzzy process at a prefix, plus the
/// slot that follows and whether the draft governs this step.
struct FuzzyStep {
  ProbDist law;
  std::size_t next_slot;
  bool uses_draft;
};

FuzzyStep fuzzy_step(const ModelBackend& target, const ModelBackend& draft,
                     const TokenSeq& context, std::size_t slot, const FuzzyProcess& process) {
  ProbDist pt = target.next_dist(context);
  if (slot >= process.block_length) return {std::move(pt), 0, false};
  ProbDist pd = draft.next_dist(context);
  if (below_threshold(process.kind, pt, pd, process.threshold)) {
    return {std::move(pd), after_candidate(slot, process), true};
  }
  return {std::move(pt), 0, false};
}

void check_process(const FuzzyProcess& process) {
  if (process.block_length == 0) {
    throw Error(ErrorCode::kInvalidArgument, "block length must be >= 1");
  }
  if (!(process.threshold >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "threshold must be >= 0");
  }
}

}  // namespace

SequenceDist enumerate_target_dist(const ModelBackend& target,
                                   std::span<const TokenId> prompt, std::size_t length) {
  return run_process(target.vocab_size(), prompt, length,
                     [&](const TokenSeq& ctx, std::size_t) {
                       return spread(target.next_dist(ctx), 0);
                     });
}

SequenceDist enumerate_draft_dist(const ModelBackend& draft,
                                  std::span<const TokenId> prompt, std::size_t length) {
  return enumerate_target_dist(draft, prompt, length);
}

SequenceDist enumerate_fsd_dist(const ModelBackend& target, const ModelBackend& draft,
                                std::span<const TokenId> prompt, std::size_t length,
                                const FuzzyProcess& process) {
  check_pair(target, draft);
  check_process(process);
  return run_process(target.vocab_size(), prompt, length,
                     [&](const TokenSeq& ctx, std::size_t slot) {
                       FuzzyStep step = fuzzy_step(target, draft, ctx, slot, process);
                       return spread(step.law, step.next_slot);
                     });
}

SequenceDist enumerate_sd_dist(const ModelBackend& target, const ModelBackend& draft,
                               std::span<const TokenId> prompt, std::size_t length,
                               std::size_t block_length, bool bonus_token) {
  check_pair(target, draft);
  if (block_length == 0) throw Error(ErrorCode::kInvalidArgument, "block length must be >= 1");
  const FuzzyProcess layout{DivergenceKind::kJS, 0.0, block_length, bonus_token};
  return run_process(
      target.vocab_size(), prompt, length, [&](const TokenSeq& ctx, std::size_t slot) {
        const ProbDist pt = target.next_dist(ctx);
        if (slot >= block_length) return spread(pt, 0);
        const ProbDist pd = draft.next_dist(ctx);
        std::vector<Transition> out;
        double reject_mass = 0.0;
        for (std::size_t x = 0; x < pd.size(); ++x) {
          const auto token = static_cast<TokenId>(x);
          if (pd[token] <= 0.0) continue;
          const double accept = sd_accept_prob(pt[token], pd[token]);
          out.push_back({token, pd[token] * accept, after_candidate(slot, layout)});
          reject_mass += pd[token] * (1.0 - accept);
        }
        if (reject_mass > 0.0 && !(pt == pd)) {
          const ProbDist residual = residual_dist(pt, pd);
          for (const Transition& tr : spread(residual, 0)) {
            out.push_back({tr.token, reject_mass * tr.prob, 0});
          }
        }
        return out;
      });
}

double sequence_divergence(DivergenceKind kind, const SequenceDist& a, const SequenceDist& b) {
  if (a.vocab_size != b.vocab_size || a.length != b.length) {
    throw Error(ErrorCode::kDomainMismatch, "sequence distributions over different domains");
  }
  std::map<TokenSeq, std::pair<double, double>> joint;
  for (const auto& [seq, p] : a.probs) joint[seq].first = p;
  for (const auto& [seq, p] : b.probs) joint[seq].second = p;
  Eigen::VectorXd va(static_cast<Eigen::Index>(joint.size()));
  Eigen::VectorXd vb(static_cast<Eigen::Index>(joint.size()));
  Eigen::Index i = 0;
  for (const auto& [_, pq] : joint) {
    va[i] = pq.first;
    vb[i] = pq.second;
    ++i;
  }
  return divergence(kind, va, vb);
}

BoundReport check_bound(const ModelBackend& target, const ModelBackend& draft,
                        std::span<const TokenId> prompt, std::size_t length,
                        const FuzzyProcess& process) {
  check_pair(target, draft);
  check_process(process);
  check_enumerable(target.vocab_size(), length);

  BoundReport report;
  report.kind = process.kind;
  report.length = length;
  report.threshold = process.threshold;
  report.p_use_per_step.assign(length, 0.0);
  report.step_terms.assign(length, 0.0);

  // Walk prefixes carrying both the target-measure and the fuzzy-measure
  // mass; the block slot is a function of the prefix.
  struct Node {
    std::size_t slot;
    double target_mass;
    double fuzzy_mass;
  };
  std::map<TokenSeq, Node> layer{{TokenSeq{}, Node{0, 1.0, 1.0}}};
  double draft_tokens = 0.0;
  for (std::size_t t = 0; t < length; ++t) {
    std::map<TokenSeq, Node> next;
    for (const auto& [prefix, node] : layer) {
      const TokenSeq ctx = join(prompt, prefix);
      const FuzzyStep step = fuzzy_step(target, draft, ctx, node.slot, process);
      const ProbDist pt = target.next_dist(ctx);
      if (step.uses_draft) {
        report.p_use_per_step[t] += node.target_mass;
        report.step_terms[t] += node.target_mass * divergence(process.kind, pt, step.law);
        draft_tokens += node.fuzzy_mass;
      }
      for (std::size_t x = 0; x < pt.size(); ++x) {
        const auto token = static_cast<TokenId>(x);
        const double wt = node.target_mass * pt[token];
        const double wf = node.fuzzy_mass * step.law[token];
        if (wt <= 0.0 && wf <= 0.0) continue;
        TokenSeq extended = prefix;
        extended.push_back(token);
        next.emplace(std::move(extended), Node{step.next_slot, wt, wf});
      }
    }
    layer = std::move(next);
  }

  const SequenceDist target_dist = enumerate_target_dist(target, prompt, length);
  const SequenceDist fuzzy_dist = enumerate_fsd_dist(target, draft, prompt, length, process);
  report.exact = sequence_divergence(process.kind, target_dist, fuzzy_dist);
  for (std::size_t t = 0; t < length; ++t) {
    report.p_use += report.p_use_per_step[t];
    report.step_terms_sum += report.step_terms[t];
  }
  if (length > 0) {
    report.p_use /= static_cast<double>(length);
    report.realized_draft_fraction = draft_tokens / static_cast<double>(length);
  }
  report.bound = static_cast<double>(length) * report.p_use * process.threshold;
  report.slack = report.bound - report.exact;
  return report;
}

SequenceDist enumerate_masked_dist(const ModelBackend& target, const ModelBackend& draft,
                                   std::span<const TokenId> prompt,
                                   const std::vector<bool>& mask) {
  check_pair(target, draft);
  return run_process(target.vocab_size(), prompt, mask.size(),
                     [&](const TokenSeq& ctx, std::size_t) {
                       const std::size_t t = ctx.size() - prompt.size();
                       return spread(mask[t] ? draft.next_dist(ctx) : target.next_dist(ctx), 0);
                     });
}

RandomBaselineReport compare_random_baseline(const ModelBackend& target,
                                             const ModelBackend& draft,
                                             std::span<const TokenId> prompt,
                                             std::size_t length, DivergenceKind kind,
                                             double threshold, std::size_t mask_samples,
                                             Rng& rng) {
  const FuzzyProcess process{kind, threshold, std::max<std::size_t>(length, 1), false};
  const BoundReport fuzzy = check_bound(target, draft, prompt, length, process);

  RandomBaselineReport report;
  report.kind = kind;
  report.threshold = threshold;
  report.fsd_divergence = fuzzy.exact;
  report.draft_fraction = fuzzy.realized_draft_fraction;

  const SequenceDist target_dist = enumerate_target_dist(target, prompt, length);
  const double p = report.draft_fraction;
  constexpr std::size_t kExhaustiveMaskLimit = 4096;
  const bool exhaustive = length < 63 && (std::size_t{1} << length) <= kExhaustiveMaskLimit;
  report.masks_exhaustive = exhaustive;

  if (exhaustive) {
    const std::size_t count = std::size_t{1} << length;
    for (std::size_t bits = 0; bits < count; ++bits) {
      std::vector<bool> mask(length);
      double weight = 1.0;
      for (std::size_t t = 0; t < length; ++t) {
        mask[t] = ((bits >> t) & 1U) != 0;
        weight *= mask[t] ? p : 1.0 - p;
      }
      ++report.masks_evaluated;
      if (weight <= 0.0) continue;
      report.random_divergence +=
          weight * sequence_divergence(kind, target_dist,
                                       enumerate_masked_dist(target, draft, prompt, mask));
    }
  } else {
    if (mask_samples == 0) {
      throw Error(ErrorCode::kInvalidArgument, "mask sampling needs at least one sample");
    }
    for (std::size_t s = 0; s < mask_samples; ++s) {
      std::vector<bool> mask(length);
      for (std::size_t t = 0; t < length; ++t) mask[t] = rng.uniform() < p;
      report.random_divergence += sequence_divergence(
          kind, target_dist, enumerate_masked_dist(target, draft, prompt, mask));
    }
    report.masks_evaluated = mask_samples;
    report.random_divergence /= static_cast<double>(mask_samples);
  }
  return report;
}

}  // namespace fuzzyspec
