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

// Normalized conformity measure A = (y - y_hat) / sigma_hat and the
// test-conditional calibration scores C_i = y_hat + sigma_hat * r_i.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "cqe/core_types.hpp"

namespace cqe {

inline double conformity_score(const PointPrediction& pred, double label) {
  detail::require(std::isfinite(label), "conformity score: non-finite label for " + pred.id());
  return (label - pred.y_hat()) / pred.sigma_hat();
}

/// Sorted normalized residuals over a calibration set. Ties are kept.
inline ConformalModel fit_conformal(std::span<const PointPrediction> calib_preds,
                                    std::span<const LabeledExample> calib, std::size_t feature_dim,
                                    Provenance provenance = {}) {
  detail::require(!calib_preds.empty(), "fit_conformal: empty calibration set");
  if (calib_preds.size() != calib.size()) {
    throw ContractError("fit_conformal: " + std::to_string(calib_preds.size()) + " predictions for " +
                        std::to_string(calib.size()) + " calibration examples");
  }
  std::vector<double> residuals;
  residuals.reserve(calib.size());
  for (std::size_t i = 0; i < calib.size(); ++i) {
    if (calib_preds[i].id() != calib[i].id()) {
      throw ContractError("fit_conformal: id misalignment at row " + std::to_string(i) + ": prediction '" +
                          calib_preds[i].id() + "' vs example '" + calib[i].id() + "'");
    }
    residuals.push_back(conformity_score(calib_preds[i], calib[i].label()));
  }
  detail::require(detail::all_finite(residuals), "fit_conformal: non-finite residual (sigma_hat too small?)");
  std::sort(residuals.begin(), residuals.end());
  return ConformalModel(std::move(residuals), feature_dim, std::move(provenance));
}

/// Overload for bare aligned label arrays (no ids to cross-check).
inline ConformalModel fit_conformal(std::span<const PointPrediction> calib_preds, std::span<const double> labels,
                                    std::size_t feature_dim = 1, Provenance provenance = {}) {
  detail::require(!calib_preds.empty(), "fit_conformal: empty calibration set");
  if (calib_preds.size() != labels.size()) {
    throw ContractError("fit_conformal: " + std::to_string(calib_preds.size()) + " predictions for " +
                        std::to_string(labels.size()) + " labels");
  }
  std::vector<double> residuals;
  residuals.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) residuals.push_back(conformity_score(calib_preds[i], labels[i]));
  detail::require(detail::all_finite(residuals), "fit_conformal: non-finite residual (sigma_hat too small?)");
  std::sort(residuals.begin(), residuals.end());
  return ConformalModel(std::move(residuals), feature_dim, std::move(provenance));
}

/// C_i = y_hat + sigma_hat * r_i. sigma_hat > 0 makes the map increasing, so
/// the output inherits the residuals' ascending order.
inline std::vector<double> calibration_scores(const ConformalModel& model, const PointPrediction& test_pred) {
  const auto r = model.residuals();
  std::vector<double> scores(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) scores[i] = test_pred.y_hat() + test_pred.sigma_hat() * r[i];
  return scores;
}

inline PredictiveDistribution make_distribution(const ConformalModel& model, const PointPrediction& test_pred,
                                                double tau) {
  return PredictiveDistribution(calibration_scores(model, test_pred), tau);
}

}  // namespace cqe
