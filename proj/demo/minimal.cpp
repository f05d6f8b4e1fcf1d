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

// Wrapping an arbitrary point predictor: calibrate on held-out residuals,
// then query the predictive CDF and intervals for a new object.

#include <iostream>
#include <vector>

#include "cqe/cqe.hpp"

int main() {
  // Calibration labels with the predictions (y_hat, sigma_hat) some
  // upstream model produced for them.
  const std::vector<double> labels = {1.0, 0.0, 2.0, 0.3, -0.5, 1.2, 0.8, -0.1, 0.4, 1.7};
  const std::vector<cqe::PointPrediction> calib = {
      {"c0", 0.5, 1.0}, {"c1", 0.2, 0.5}, {"c2", 1.0, 2.0}, {"c3", 0.1, 0.4}, {"c4", -0.2, 0.6},
      {"c5", 1.0, 0.8}, {"c6", 0.9, 0.3}, {"c7", 0.0, 0.5}, {"c8", 0.6, 0.7}, {"c9", 1.5, 1.1}};
  const auto model = cqe::fit_conformal(calib, labels);

  const cqe::PointPrediction test("t0", 0.3, 0.9);
  const auto dist = cqe::make_distribution(model, test, 0.5);

  std::cout << "P(y <= 0)       = " << cqe::p_below(dist, 0.0) << '\n';
  std::cout << "median          = " << cqe::quantile(dist, 0.5) << '\n';
  const auto iv = cqe::interval(dist, 0.2);
  std::cout << "80% interval    = [" << iv.lower() << ", " << iv.upper() << "]\n";
  return 0;
}
