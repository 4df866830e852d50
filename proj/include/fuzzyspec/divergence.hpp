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

#ifndef FUZZYSPEC_DIVERGENCE_HPP
#define FUZZYSPEC_DIVERGENCE_HPP

/** @file
 * KL, Jensen-Shannon and total-variation divergences in nats.
 *
 * The kernels take any pair of dense Eigen vectors so that sequence-level
 * oracles can feed them aligned probability vectors directly; the ProbDist
 * overloads are the ones the decode loop uses. Terms with p[t] = 0
 * contribute zero. KL is +infinity when p puts mass where q has none; there
 * is no smoothing.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "fuzzyspec/error.hpp"
#include "fuzzyspec/prob.hpp"

namespace fuzzyspec {

enum class DivergenceKind { kKL, kJS, kTV };

constexpr std::string_view to_string(DivergenceKind kind) {
  switch (kind) {
    case DivergenceKind::kKL: return "KL";
    case DivergenceKind::kJS: return "JS";
    case DivergenceKind::kTV: return "TV";
  }
  return "?";
}

inline std::optional<DivergenceKind> parse_divergence_kind(std::string_view s) {
  if (s == "KL" || s == "kl") return DivergenceKind::kKL;
  if (s == "JS" || s == "js") return DivergenceKind::kJS;
  if (s == "TV" || s == "tv") return DivergenceKind::kTV;
  return std::nullopt;
}

namespace detail {

template <typename DerivedP, typename DerivedQ>
void check_vocab(const Eigen::MatrixBase<DerivedP>& p,
                 const Eigen::MatrixBase<DerivedQ>& q) {
  if (p.size() != q.size()) {
    throw Error(ErrorCode::kVocabMismatch,
                "vocabulary sizes " + std::to_string(p.size()) + " and " +
                    std::to_string(q.size()));
  }
}

}  // namespace detail

/// KL(p || q).
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar kl_divergence(const Eigen::MatrixBase<DerivedP>& p,
                                        const Eigen::MatrixBase<DerivedQ>& q) {
  using Scalar = typename DerivedP::Scalar;
  detail::check_vocab(p, q);
  Scalar total(0);
  for (Eigen::Index t = 0; t < p.size(); ++t) {
    const Scalar pt = p[t];
    if (pt <= Scalar(0)) continue;
    const Scalar qt = q[t];
    if (qt <= Scalar(0)) return std::numeric_limits<Scalar>::infinity();
    total += pt * std::log(pt / qt);
  }
  return std::max(total, Scalar(0));
}

/// JS(p, q) = KL(p || m)/2 + KL(q || m)/2 with m the midpoint; lies in
/// [0, ln 2].
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar js_divergence(const Eigen::MatrixBase<DerivedP>& p,
                                        const Eigen::MatrixBase<DerivedQ>& q) {
  using Scalar = typename DerivedP::Scalar;
  detail::check_vocab(p, q);
  Scalar total(0);
  for (Eigen::Index t = 0; t < p.size(); ++t) {
    const Scalar pt = p[t];
    const Scalar qt = q[t];
    const Scalar mt = (pt + qt) / Scalar(2);
    const Scalar a = pt > Scalar(0) ? pt * std::log(pt / mt) : Scalar(0);
    const Scalar b = qt > Scalar(0) ? qt * std::log(qt / mt) : Scalar(0);
    total += a + b;
  }
  return std::clamp(total / Scalar(2), Scalar(0), Scalar(std::log(Scalar(2))));
}

/// TV(p, q) = sum |p - q| / 2.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar tv_distance(const Eigen::MatrixBase<DerivedP>& p,
                                      const Eigen::MatrixBase<DerivedQ>& q) {
  using Scalar = typename DerivedP::Scalar;
  detail::check_vocab(p, q);
  return std::min(Scalar((p - q).cwiseAbs().sum() / Scalar(2)), Scalar(1));
}

template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar divergence(DivergenceKind kind,
                                     const Eigen::MatrixBase<DerivedP>& p,
                                     const Eigen::MatrixBase<DerivedQ>& q) {
  switch (kind) {
    case DivergenceKind::kKL: return kl_divergence(p, q);
    case DivergenceKind::kJS: return js_divergence(p, q);
    case DivergenceKind::kTV: return tv_distance(p, q);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown divergence kind");
}

template <typename Scalar>
Scalar kl(const BasicProbDist<Scalar>& p, const BasicProbDist<Scalar>& q) {
  return kl_divergence(p.probs(), q.probs());
}

template <typename Scalar>
Scalar js(const BasicProbDist<Scalar>& p, const BasicProbDist<Scalar>& q) {
  return js_divergence(p.probs(), q.probs());
}

template <typename Scalar>
Scalar tv(const BasicProbDist<Scalar>& p, const BasicProbDist<Scalar>& q) {
  return tv_distance(p.probs(), q.probs());
}

template <typename Scalar>
Scalar divergence(DivergenceKind kind, const BasicProbDist<Scalar>& p,
                  const BasicProbDist<Scalar>& q) {
  return divergence(kind, p.probs(), q.probs());
}

/// The fuzzy acceptance test: Div(p, q) < threshold, strictly. An infinite
/// divergence never passes, and nothing passes at threshold 0.
template <typename Scalar>
bool below_threshold(DivergenceKind kind, const BasicProbDist<Scalar>& p,
                     const BasicProbDist<Scalar>& q, double threshold) {
  if (!(threshold >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "threshold must be non-negative");
  }
  return static_cast<double>(divergence(kind, p, q)) < threshold;
}

}  // namespace fuzzyspec

#endif  // FUZZYSPEC_DIVERGENCE_HPP
