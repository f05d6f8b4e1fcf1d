// Copyright 2026 The cqe Authors
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

// Split conformal predictive system: the randomized stepwise CDF over the
// calibration scores, its counting-form twin, quantiles and central
// prediction intervals.
//
// With n sorted calibration scores C_(1..n), C_(0) = -inf, C_(n+1) = +inf:
//
//   Q(y) = (i + tau) / (n + 1)                         y in (C_(i), C_(i+1))
//   Q(y) = (i' - 1 + (i'' - i' + 2) tau) / (n + 1)     y == C_(i)
//
// where i' and i'' are the first and last (1-based) positions of the score
// equal to y. Ties are exact floating-point equality.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <variant>

#include "cqe/core_types.hpp"
#include "cqe/format.hpp"
#include "cqe/rng.hpp"

namespace cqe {

/// How each test object's tau is chosen. One draw per object, shared by
/// every query against that object's distribution.
class TauPolicy {
 public:
  struct SeededRandom {
    std::uint64_t seed;
  };
  struct Fixed {
    double value;
  };

  static TauPolicy seeded_random(std::uint64_t seed) { return TauPolicy(SeededRandom{seed}); }
  static TauPolicy fixed(double value) {
    detail::require(value >= 0.0 && value <= 1.0, "tau policy: fixed value must lie in [0,1]");
    return TauPolicy(Fixed{value});
  }

  bool is_fixed() const noexcept { return std::holds_alternative<Fixed>(mode_); }
  const std::variant<SeededRandom, Fixed>& mode() const noexcept { return mode_; }

  /// "fixed:0.5" or "random:42".
  std::string to_string() const;

 private:
  explicit TauPolicy(std::variant<SeededRandom, Fixed> mode) : mode_(mode) {}
  std::variant<SeededRandom, Fixed> mode_;
};

inline std::string TauPolicy::to_string() const {
  if (const auto* f = std::get_if<Fixed>(&mode_)) return "fixed:" + format_real(f->value);
  return "random:" + std::to_string(std::get<SeededRandom>(mode_).seed);
}

inline double draw_tau(const TauPolicy& policy, std::uint64_t example_index) {
  if (const auto* f = std::get_if<TauPolicy::Fixed>(&policy.mode())) return f->value;
  const auto& r = std::get<TauPolicy::SeededRandom>(policy.mode());
  return rng::keyed_uniform(r.seed, example_index);
}

namespace detail {

/// Snaps values within rounding noise of an integer, so index arithmetic
/// like 0.45 * 20 lands on 9 rather than 9.000000000000002.
inline double snap_integral(double x) {
  const double r = std::nearbyint(x);
  return std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x)) ? r : x;
}

}  // namespace detail

/// Q(y) by the two-branch step-function definition.
inline double cdf_value(const PredictiveDistribution& dist, double y) {
  detail::require(std::isfinite(y), "cdf_value: non-finite query");
  const auto c = dist.thresholds();
  const auto n = c.size();
  const auto lo = static_cast<std::size_t>(std::lower_bound(c.begin(), c.end(), y) - c.begin());
  const auto hi = static_cast<std::size_t>(std::upper_bound(c.begin(), c.end(), y) - c.begin());
  const double denom = static_cast<double>(n + 1);
  if (lo == hi) {
    // y in (C_(lo), C_(lo+1))
    return (static_cast<double>(lo) + dist.tau()) / denom;
  }
  const std::size_t first = lo + 1;  // i'
  const std::size_t last = hi;       // i''
  return (static_cast<double>(first - 1) + static_cast<double>(last - first + 2) * dist.tau()) / denom;
}

/// Q by direct counting over conformity scores:
/// (#{a_i < a_y} + tau * #{a_i == a_y} + tau) / (n + 1). Scores need not be sorted.
inline double transducer_q(std::span<const double> scores, double alpha_y, double tau) {
  detail::require(!scores.empty(), "transducer_q: empty score set");
  detail::require(tau >= 0.0 && tau <= 1.0, "transducer_q: tau must lie in [0,1]");
  detail::require(std::isfinite(alpha_y), "transducer_q: non-finite query");
  std::size_t less = 0;
  std::size_t equal = 0;
  for (const double a : scores) {
    if (a < alpha_y) {
      ++less;
    } else if (a == alpha_y) {
      ++equal;
    }
  }
  return (static_cast<double>(less) + tau * static_cast<double>(equal) + tau) /
         static_cast<double>(scores.size() + 1);
}

/// C_(ceil(p (n+1))), with indices past n mapping to +inf.
///
/// The one-sided limit Q(q+) is >= p for every tau; Q(q) itself is >= p
/// when tau = 1.
inline double quantile(const PredictiveDistribution& dist, double p) {
  detail::require(p > 0.0 && p < 1.0, "quantile: p must lie in (0,1)");
  const auto n = dist.size();
  const double pos = std::ceil(detail::snap_integral(p * static_cast<double>(n + 1)));
  if (pos < 1.0) return -kInf;
  if (pos > static_cast<double>(n)) return kInf;
  return dist.thresholds()[static_cast<std::size_t>(pos) - 1];
}

/// Central interval [C_(floor(eps/2 (n+1))), quantile(1 - eps/2)] at
/// confidence 1 - eps. Index 0 maps to -inf. eps = 1 is accepted as the
/// top of a significance grid.
inline PredictionInterval interval(const PredictiveDistribution& dist, double epsilon) {
  detail::require(epsilon > 0.0 && epsilon <= 1.0, "interval: epsilon must lie in (0,1]");
  const auto n = dist.size();
  const double lower_pos = std::floor(detail::snap_integral(0.5 * epsilon * static_cast<double>(n + 1)));
  const double lower =
      lower_pos < 1.0 ? -kInf : dist.thresholds()[std::min(static_cast<std::size_t>(lower_pos), n) - 1];
  const double upper = quantile(dist, 1.0 - 0.5 * epsilon);
  return PredictionInterval(lower, upper, 1.0 - epsilon);
}

/// Predicted probability that the label is <= threshold.
inline double p_below(const PredictiveDistribution& dist, double threshold) {
  detail::require(std::isfinite(threshold), "p_below: non-finite threshold");
  return cdf_value(dist, threshold);
}

}  // namespace cqe
