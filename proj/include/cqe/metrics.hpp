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

// Evaluation metrics for interval predictors: expected calibration error
// over a significance grid, sharpness, and AUROC for bottom-decile failure
// detection.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "cqe/core_types.hpp"

namespace cqe {

/// Strictly increasing significance levels in (0, 1].
class SignificanceGrid {
 public:
  explicit SignificanceGrid(std::vector<double> levels) : levels_(std::move(levels)) {
    detail::require(!levels_.empty(), "significance grid: no levels");
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      detail::require(levels_[i] > 0.0 && levels_[i] <= 1.0, "significance grid: levels must lie in (0,1]");
      detail::require(i == 0 || levels_[i - 1] < levels_[i], "significance grid: levels must be strictly increasing");
    }
  }

  /// {step, 2 step, ..., 1}; 1/step must be an integer. The default step
  /// gives the 50-level grid {0.02, ..., 1.00}.
  static SignificanceGrid uniform(double step = 0.02) {
    detail::require(step > 0.0 && step <= 1.0, "significance grid: step must lie in (0,1]");
    const double count = std::nearbyint(1.0 / step);
    detail::require(std::abs(count * step - 1.0) <= 1e-9, "significance grid: 1/step must be an integer");
    const auto k = static_cast<std::size_t>(count);
    std::vector<double> levels(k);
    for (std::size_t i = 0; i < k; ++i) levels[i] = static_cast<double>(i + 1) / count;
    return SignificanceGrid(std::move(levels));
  }

  std::span<const double> levels() const noexcept { return levels_; }
  std::size_t size() const noexcept { return levels_.size(); }

 private:
  std::vector<double> levels_;
};

struct ReliabilityRow {
  double epsilon;
  double err;  // fraction of intervals missing the true label
};

/// Fraction of labels outside their (closed) interval.
inline double error_rate(std::span<const PredictionInterval> intervals, std::span<const double> labels) {
  detail::require(!labels.empty(), "error_rate: empty label set");
  detail::require(intervals.size() == labels.size(), "error_rate: interval and label counts differ");
  std::size_t misses = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) misses += intervals[i].contains(labels[i]) ? 0 : 1;
  return static_cast<double>(misses) / static_cast<double>(labels.size());
}

/// Per-level error rates. `provider(eps)` returns one interval per label.
template <typename Provider>
std::vector<ReliabilityRow> reliability_table(Provider&& provider, std::span<const double> labels,
                                              const SignificanceGrid& grid) {
  detail::require(!labels.empty(), "reliability_table: empty label set");
  std::vector<ReliabilityRow> table;
  table.reserve(grid.size());
  for (const double eps : grid.levels()) {
    const std::vector<PredictionInterval> intervals = provider(eps);
    table.push_back({eps, error_rate(intervals, labels)});
  }
  return table;
}

inline double ece_from_table(std::span<const ReliabilityRow> table) {
  detail::require(!table.empty(), "ece: empty reliability table");
  double sum = 0.0;
  for (const auto& row : table) sum += std::abs(row.err - row.epsilon);
  return sum / static_cast<double>(table.size());
}

/// Mean |err(eps) - eps| over the grid.
template <typename Provider>
double ece(Provider&& provider, std::span<const double> labels, const SignificanceGrid& grid) {
  const auto table = reliability_table(std::forward<Provider>(provider), labels, grid);
  return ece_from_table(table);
}

struct Sharpness {
  double mean_width;
  std::size_t excluded_unbounded;
};

/// Mean width over bounded intervals; unbounded ones are counted, not averaged.
inline Sharpness sharpness(std::span<const PredictionInterval> intervals) {
  detail::require(!intervals.empty(), "sharpness: no intervals");
  double sum = 0.0;
  std::size_t bounded = 0;
  for (const auto& iv : intervals) {
    if (!iv.bounded()) continue;
    sum += iv.width();
    ++bounded;
  }
  if (bounded == 0) throw DegenerateError("sharpness: every interval is unbounded");
  return {sum / static_cast<double>(bounded), intervals.size() - bounded};
}

struct DecileFlags {
  std::vector<int> flags;  // 1 = critical failure (bottom decile)
  double threshold;
  /// Every label is tied at the threshold; all flagged.
  bool degenerate;
};

/// Empirical 10th percentile with linear interpolation between order
/// statistics (position 0.1 (n-1)); flag = label <= threshold.
inline DecileFlags bottom_decile_flags(std::span<const double> labels) {
  detail::require(labels.size() >= 10, "bottom_decile_flags: need at least 10 labels, got " +
                                           std::to_string(labels.size()));
  detail::require(detail::all_finite(labels), "bottom_decile_flags: non-finite label");
  std::vector<double> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = 0.1 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  const double threshold =
      lo + 1 < sorted.size() ? sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]) : sorted[lo];
  DecileFlags out{std::vector<int>(labels.size()), threshold, sorted.front() == sorted.back()};
  for (std::size_t i = 0; i < labels.size(); ++i) out.flags[i] = labels[i] <= threshold ? 1 : 0;
  return out;
}

/// Tie-corrected AUROC, equal to the Mann-Whitney U / (n_pos n_neg).
/// Positives are flags == 1; higher scores are expected for positives.
///
/// Computed from doubled mid-ranks so the numerator stays an exact integer.
inline double auroc(std::span<const double> scores, std::span<const int> flags) {
  detail::require(scores.size() == flags.size(), "auroc: scores and flags differ in length");
  detail::require(std::none_of(scores.begin(), scores.end(), [](double s) { return std::isnan(s); }),
                  "auroc: NaN score");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::uint64_t n_pos = 0;
  std::uint64_t rank2_pos = 0;  // sum over positives of 2 * mid-rank
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start + 1;
    while (end < n && scores[order[end]] == scores[order[start]]) ++end;
    // Ranks start+1 .. end share the mid-rank (start + 1 + end) / 2.
    const std::uint64_t group_rank2 = start + 1 + end;
    for (std::size_t k = start; k < end; ++k) {
      if (flags[order[k]] != 0) {
        ++n_pos;
        rank2_pos += group_rank2;
      }
    }
    start = end;
  }
  const std::uint64_t n_neg = n - n_pos;
  detail::require(n_pos > 0 && n_neg > 0, "auroc: both classes must be present");
  const std::uint64_t u2 = rank2_pos - n_pos * (n_pos + 1);
  return static_cast<double>(u2) / static_cast<double>(2 * n_pos * n_neg);
}

}  // namespace cqe
