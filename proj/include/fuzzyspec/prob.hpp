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

#ifndef FUZZYSPEC_PROB_HPP
#define FUZZYSPEC_PROB_HPP

/** @file
 * Token and categorical-distribution primitives.
 *
 * Distributions are dense Eigen column vectors in linear space. A
 * BasicProbDist is validated once, at construction, and is immutable
 * afterwards; every other routine in the library may assume its invariants.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "fuzzyspec/error.hpp"
#include "fuzzyspec/rng.hpp"

namespace fuzzyspec {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

/// Entries of a valid distribution must sum to one within this tolerance.
inline constexpr double kNormTolerance = 1e-9;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
class BasicProbDist {
 public:
  using scalar_type = Scalar;
  using vector_type = Vector<Scalar>;

  /// Throws kInvalidDistribution unless every entry is finite, non-negative,
  /// and the entries sum to one within kNormTolerance.
  explicit BasicProbDist(vector_type probs) : probs_(std::move(probs)) {
    if (probs_.size() == 0) {
      throw Error(ErrorCode::kInvalidDistribution, "empty distribution");
    }
    for (Eigen::Index i = 0; i < probs_.size(); ++i) {
      if (!std::isfinite(probs_[i]) || probs_[i] < Scalar(0)) {
        throw Error(ErrorCode::kInvalidDistribution,
                    "entry " + std::to_string(i) + " is negative or not finite");
      }
    }
    const Scalar total = probs_.sum();
    if (std::abs(total - Scalar(1)) > Scalar(kNormTolerance)) {
      throw Error(ErrorCode::kInvalidDistribution,
                  "entries sum to " + std::to_string(static_cast<double>(total)));
    }
  }

  BasicProbDist(std::initializer_list<Scalar> probs)
      : BasicProbDist(to_vector(probs)) {}

  static BasicProbDist uniform(std::size_t vocab_size) {
    return BasicProbDist(vector_type::Constant(
        static_cast<Eigen::Index>(vocab_size), Scalar(1) / Scalar(vocab_size)));
  }

  static BasicProbDist point_mass(std::size_t vocab_size, TokenId token) {
    if (token >= vocab_size) {
      throw Error(ErrorCode::kTokenOutOfRange, "point mass outside vocabulary");
    }
    vector_type v = vector_type::Zero(static_cast<Eigen::Index>(vocab_size));
    v[token] = Scalar(1);
    return BasicProbDist(std::move(v));
  }

  const vector_type& probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(probs_.size()); }
  Scalar operator[](TokenId token) const { return probs_[token]; }

  friend bool operator==(const BasicProbDist& a, const BasicProbDist& b) {
    return a.probs_.size() == b.probs_.size() && a.probs_ == b.probs_;
  }

 private:
  static vector_type to_vector(std::initializer_list<Scalar> probs) {
    vector_type v(static_cast<Eigen::Index>(probs.size()));
    Eigen::Index i = 0;
    for (Scalar p : probs) v[i++] = p;
    return v;
  }

  vector_type probs_;
};

using ProbDist = BasicProbDist<double>;

/// Rescales non-negative weights to a distribution.
template <typename Derived>
BasicProbDist<typename Derived::Scalar> normalize(
    const Eigen::MatrixBase<Derived>& weights) {
  using Scalar = typename Derived::Scalar;
  if ((weights.array() < Scalar(0)).any()) {
    throw Error(ErrorCode::kNegativeWeight, "weights must be non-negative");
  }
  const Scalar total = weights.sum();
  if (!(total > Scalar(0))) {
    throw Error(ErrorCode::kAllZero, "at least one weight must be positive");
  }
  return BasicProbDist<Scalar>(Vector<Scalar>(weights / total));
}

inline ProbDist normalize(const std::vector<double>& weights) {
  return normalize(Eigen::Map<const Eigen::VectorXd>(
      weights.data(), static_cast<Eigen::Index>(weights.size())));
}

/// Inverse-CDF sampling with exactly one uniform draw. Zero-probability
/// tokens are never returned.
template <typename Scalar>
TokenId sample(const BasicProbDist<Scalar>& dist, Rng& rng) {
  const auto& p = dist.probs();
  const double u = rng.uniform();
  double cumulative = 0.0;
  Eigen::Index last_positive = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] <= Scalar(0)) continue;
    last_positive = i;
    cumulative += static_cast<double>(p[i]);
    if (u < cumulative) return static_cast<TokenId>(i);
  }
  // Rounding left the cumulative sum a hair under one.
  return static_cast<TokenId>(last_positive);
}

/// Index of the largest probability; ties go to the lowest index.
template <typename Scalar>
TokenId argmax(const BasicProbDist<Scalar>& dist) {
  const auto& p = dist.probs();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

/// Renormalised p^(1/tau), evaluated in log space so small tau does not
/// underflow.
template <typename Scalar>
BasicProbDist<Scalar> apply_temperature(const BasicProbDist<Scalar>& dist,
                                        double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::kNonPositiveTemperature,
                "temperature must be positive, got " + std::to_string(tau));
  }
  if (tau == 1.0) return dist;
  const auto& p = dist.probs();
  Scalar max_log = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] > Scalar(0)) max_log = std::max(max_log, Scalar(std::log(p[i])));
  }
  Vector<Scalar> w(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    w[i] = p[i] > Scalar(0)
               ? Scalar(std::exp((std::log(p[i]) - max_log) / Scalar(tau)))
               : Scalar(0);
  }
  return normalize(w);
}

}  // namespace fuzzyspec

#endif  // FUZZYSPEC_PROB_HPP
