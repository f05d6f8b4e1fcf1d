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

// Exhaustive k-nearest-neighbour regressor and the distance-sum difficulty
// estimator used as sigma_hat in the normalized conformity measure.
//
// Neighbour search runs in feature space only; the label of a query object
// is unknown at prediction time. Equal distances are ordered by ascending
// training id (then label, then features), which makes every query
// independent of the order the training set was supplied in.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cqe/core_types.hpp"

namespace cqe {

enum class Distance { euclidean };

struct KnnConfig {
  std::size_t k_regress = 10;
  std::size_t k_difficulty = 25;
  /// Floor added to the distance sum so sigma_hat > 0 everywhere.
  double beta = 1e-6;
  Distance distance = Distance::euclidean;
};

struct Neighbor {
  double distance;
  std::size_t index;  // into FittedKnn::train()
};

class FittedKnn {
 public:
  FittedKnn(std::vector<LabeledExample> train, KnnConfig config) : train_(std::move(train)), config_(config) {
    detail::require(!train_.empty(), "knn fit: empty training set");
    dim_ = uniform_dimension(train_);
    detail::require(config_.k_regress >= 1 && config_.k_regress <= train_.size(),
                    "knn fit: k_regress=" + std::to_string(config_.k_regress) + " must lie in [1, " +
                        std::to_string(train_.size()) + "]");
    detail::require(config_.k_difficulty >= 1 && config_.k_difficulty <= train_.size(),
                    "knn fit: k_difficulty=" + std::to_string(config_.k_difficulty) + " must lie in [1, " +
                        std::to_string(train_.size()) + "]");
    detail::require(std::isfinite(config_.beta) && config_.beta > 0.0, "knn fit: beta must be finite and > 0");
    // Canonical order: index order doubles as the tie-break order.
    std::sort(train_.begin(), train_.end(), [](const LabeledExample& a, const LabeledExample& b) {
      if (a.id() != b.id()) return a.id() < b.id();
      if (a.label() != b.label()) return a.label() < b.label();
      return std::lexicographical_compare(a.features().begin(), a.features().end(), b.features().begin(),
                                          b.features().end());
    });
  }

  std::span<const LabeledExample> train() const noexcept { return train_; }
  const KnnConfig& config() const noexcept { return config_; }
  std::size_t dim() const noexcept { return dim_; }

  /// The k closest training points, nearest first.
  std::vector<Neighbor> neighbors(std::span<const double> x, std::size_t k) const {
    check_query(x);
    detail::require(k >= 1 && k <= train_.size(), "knn: k out of range");
    std::vector<Neighbor> all(train_.size());
    for (std::size_t i = 0; i < train_.size(); ++i) all[i] = {distance(train_[i].features(), x), i};
    const auto closer = [](const Neighbor& a, const Neighbor& b) {
      return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
    all.resize(k);
    return all;
  }

  /// Mean label of the k_regress nearest neighbours.
  double predict(std::span<const double> x) const {
    const auto nn = neighbors(x, config_.k_regress);
    double sum = 0.0;
    for (const auto& n : nn) sum += train_[n.index].label();
    return sum / static_cast<double>(nn.size());
  }

  /// beta + sum of distances to the k_difficulty nearest neighbours.
  double difficulty(std::span<const double> x) const {
    const auto nn = neighbors(x, config_.k_difficulty);
    double sum = config_.beta;
    for (const auto& n : nn) sum += n.distance;
    return sum;
  }

  PointPrediction point_prediction(const std::string& id, std::span<const double> x) const {
    return PointPrediction(id, predict(x), difficulty(x));
  }

  static double distance(std::span<const double> a, std::span<const double> b) noexcept {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      const double diff = a[j] - b[j];
      acc += diff * diff;
    }
    return std::sqrt(acc);
  }

 private:
  void check_query(std::span<const double> x) const {
    if (x.size() != dim_) {
      throw ContractError("knn: query has " + std::to_string(x.size()) + " features, model expects " +
                          std::to_string(dim_));
    }
    detail::require(detail::all_finite(x), "knn: non-finite query feature");
  }

  std::vector<LabeledExample> train_;
  KnnConfig config_;
  std::size_t dim_ = 0;
};

inline FittedKnn fit_knn(std::vector<LabeledExample> train, const KnnConfig& config) {
  return FittedKnn(std::move(train), config);
}

}  // namespace cqe
