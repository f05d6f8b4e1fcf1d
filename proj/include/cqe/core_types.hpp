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

// Domain vocabulary shared by every module. All types validate on
// construction and are immutable afterwards.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cqe/error.hpp"

namespace cqe {

using Provenance = std::map<std::string, std::string>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {

inline bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

inline std::string describe_id(const std::string& id) { return "'" + id + "'"; }

}  // namespace detail

/// One observation: a feature vector and its z-normalized quality label.
class LabeledExample {
 public:
  LabeledExample(std::string id, std::vector<double> features, double label)
      : id_(std::move(id)), features_(std::move(features)), label_(label) {
    detail::require(!features_.empty(), "example " + detail::describe_id(id_) + ": empty feature vector");
    detail::require(detail::all_finite(features_),
                    "example " + detail::describe_id(id_) + ": non-finite feature value");
    detail::require(std::isfinite(label_), "example " + detail::describe_id(id_) + ": non-finite label");
  }

  const std::string& id() const noexcept { return id_; }
  std::span<const double> features() const noexcept { return features_; }
  std::size_t dim() const noexcept { return features_.size(); }
  double label() const noexcept { return label_; }

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;

 private:
  std::string id_;
  std::vector<double> features_;
  double label_;
};

/// Returns the shared feature dimension, or throws if the set is empty or mixed.
inline std::size_t uniform_dimension(std::span<const LabeledExample> examples) {
  detail::require(!examples.empty(), "empty dataset");
  const std::size_t d = examples.front().dim();
  for (const auto& ex : examples) {
    if (ex.dim() != d) {
      throw ContractError("dimension mismatch: example " + detail::describe_id(ex.id()) + " has " +
                          std::to_string(ex.dim()) + " features, expected " + std::to_string(d));
    }
  }
  return d;
}

inline std::vector<double> labels_of(std::span<const LabeledExample> examples) {
  std::vector<double> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(ex.label());
  return out;
}

/// Output of an underlying regressor for one object: point prediction and
/// difficulty estimate.
class PointPrediction {
 public:
  PointPrediction(std::string id, double y_hat, double sigma_hat)
      : id_(std::move(id)), y_hat_(y_hat), sigma_hat_(sigma_hat) {
    detail::require(std::isfinite(y_hat_), "prediction " + detail::describe_id(id_) + ": non-finite y_hat");
    detail::require(std::isfinite(sigma_hat_) && sigma_hat_ > 0.0,
                    "prediction " + detail::describe_id(id_) + ": sigma_hat must be finite and > 0");
  }

  const std::string& id() const noexcept { return id_; }
  double y_hat() const noexcept { return y_hat_; }
  double sigma_hat() const noexcept { return sigma_hat_; }

  friend bool operator==(const PointPrediction&, const PointPrediction&) = default;

 private:
  std::string id_;
  double y_hat_;
  double sigma_hat_;
};

/// Fitted split-conformal artifact. Stores the normalized calibration
/// residuals r_i = (y_i - y_hat_i) / sigma_hat_i in ascending order.
class ConformalModel {
 public:
  ConformalModel(std::vector<double> residuals, std::size_t feature_dim, Provenance provenance = {})
      : residuals_(std::move(residuals)), feature_dim_(feature_dim), provenance_(std::move(provenance)) {
    detail::require(!residuals_.empty(), "conformal model: empty calibration set");
    detail::require(detail::all_finite(residuals_), "conformal model: non-finite residual");
    detail::require(std::is_sorted(residuals_.begin(), residuals_.end()),
                    "conformal model: residuals must be sorted ascending");
    detail::require(feature_dim_ >= 1, "conformal model: feature_dim must be >= 1");
  }

  std::span<const double> residuals() const noexcept { return residuals_; }
  std::size_t n_calib() const noexcept { return residuals_.size(); }
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  const Provenance& provenance() const noexcept { return provenance_; }

  friend bool operator==(const ConformalModel&, const ConformalModel&) = default;

 private:
  std::vector<double> residuals_;
  std::size_t feature_dim_;
  Provenance provenance_;
};

/// Stepwise predictive CDF for one test object: sorted calibration scores
/// C_(1..n) (sentinels -inf/+inf implied) and the object's tau draw.
class PredictiveDistribution {
 public:
  PredictiveDistribution(std::vector<double> thresholds, double tau)
      : thresholds_(std::move(thresholds)), tau_(tau) {
    detail::require(!thresholds_.empty(), "predictive distribution: no thresholds");
    detail::require(detail::all_finite(thresholds_), "predictive distribution: non-finite threshold");
    detail::require(std::is_sorted(thresholds_.begin(), thresholds_.end()),
                    "predictive distribution: thresholds must be sorted ascending");
    detail::require(tau_ >= 0.0 && tau_ <= 1.0, "predictive distribution: tau must lie in [0,1]");
  }

  std::span<const double> thresholds() const noexcept { return thresholds_; }
  std::size_t size() const noexcept { return thresholds_.size(); }
  double tau() const noexcept { return tau_; }

 private:
  std::vector<double> thresholds_;
  double tau_;
};

/// Closed interval [lower, upper]; either endpoint may be infinite.
/// confidence = 1 - epsilon. The edge level epsilon = 1 (confidence 0) is
/// admitted because significance grids end at 1.
class PredictionInterval {
 public:
  PredictionInterval(double lower, double upper, double confidence)
      : lower_(lower), upper_(upper), confidence_(confidence) {
    detail::require(!std::isnan(lower_) && !std::isnan(upper_), "prediction interval: NaN endpoint");
    detail::require(lower_ <= upper_, "prediction interval: lower > upper");
    detail::require(confidence_ >= 0.0 && confidence_ < 1.0, "prediction interval: confidence must lie in [0,1)");
  }

  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  double confidence() const noexcept { return confidence_; }
  bool bounded() const noexcept { return std::isfinite(lower_) && std::isfinite(upper_); }
  double width() const noexcept { return upper_ - lower_; }
  bool contains(double y) const noexcept { return lower_ <= y && y <= upper_; }

  friend bool operator==(const PredictionInterval&, const PredictionInterval&) = default;

 private:
  double lower_;
  double upper_;
  double confidence_;
};

struct EvalReportFields {
  std::string method_name;
  std::size_t n_test = 0;
  double ece = 0.0;
  /// confidence level -> mean width over bounded intervals. A level whose
  /// intervals are all unbounded has no entry here.
  std::map<double, double> sharpness_at;
  /// confidence level -> number of unbounded intervals excluded from the mean.
  std::map<double, std::size_t> sharpness_excluded;
  double auroc = 0.5;
  double decile_threshold = 0.0;
  Provenance provenance;
};

/// Metrics for one method on one test set.
class EvalReport {
 public:
  explicit EvalReport(EvalReportFields fields) : f_(std::move(fields)) {
    detail::require(!f_.method_name.empty(), "eval report: empty method name");
    detail::require(f_.n_test >= 1, "eval report: n_test must be >= 1");
    detail::require(f_.ece >= 0.0 && f_.ece <= 1.0, "eval report: ece must lie in [0,1]");
    detail::require(f_.auroc >= 0.0 && f_.auroc <= 1.0, "eval report: auroc must lie in [0,1]");
    for (const auto& [level, width] : f_.sharpness_at) {
      detail::require(std::isfinite(width) && width >= 0.0, "eval report: sharpness must be finite and >= 0");
      (void)level;
    }
  }

  const std::string& method_name() const noexcept { return f_.method_name; }
  std::size_t n_test() const noexcept { return f_.n_test; }
  double ece() const noexcept { return f_.ece; }
  const std::map<double, double>& sharpness_at() const noexcept { return f_.sharpness_at; }
  const std::map<double, std::size_t>& sharpness_excluded() const noexcept { return f_.sharpness_excluded; }
  double auroc() const noexcept { return f_.auroc; }
  double decile_threshold() const noexcept { return f_.decile_threshold; }
  const Provenance& provenance() const noexcept { return f_.provenance; }
  const EvalReportFields& fields() const noexcept { return f_; }

 private:
  EvalReportFields f_;
};

}  // namespace cqe
