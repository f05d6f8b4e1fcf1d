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

// Fixed-variance Gaussian baseline: every prediction y_hat becomes
// N(y_hat, sigma_fixed^2), where sigma_fixed^2 is the validation-set mean
// squared error. Interval width is therefore the same for every object.

#pragma once

#include <cmath>
#include <numbers>
#include <span>

#include "cqe/core_types.hpp"

namespace cqe {

class GaussianBaseline {
 public:
  explicit GaussianBaseline(double sigma_fixed) : sigma_fixed_(sigma_fixed) {
    detail::require(std::isfinite(sigma_fixed_) && sigma_fixed_ > 0.0,
                    "gaussian baseline: sigma_fixed must be finite and > 0");
  }
  double sigma_fixed() const noexcept { return sigma_fixed_; }

  friend bool operator==(const GaussianBaseline&, const GaussianBaseline&) = default;

 private:
  double sigma_fixed_;
};

/// sigma_fixed = sqrt(mean((y - y_hat)^2)), population mean.
inline GaussianBaseline fit_sigma_fixed(std::span<const double> val_labels, std::span<const double> val_preds) {
  detail::require(!val_labels.empty(), "fit_sigma_fixed: empty validation set");
  detail::require(val_labels.size() == val_preds.size(), "fit_sigma_fixed: labels and predictions differ in length");
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < val_labels.size(); ++i) {
    const double r = val_labels[i] - val_preds[i];
    sum_sq += r * r;
  }
  detail::require(std::isfinite(sum_sq), "fit_sigma_fixed: non-finite residual");
  if (sum_sq == 0.0) throw DegenerateError("fit_sigma_fixed: all validation residuals are zero");
  return GaussianBaseline(std::sqrt(sum_sq / static_cast<double>(val_labels.size())));
}

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

namespace detail {

// Acklam's rational approximation to the normal quantile (|rel err| < 1.2e-9).
inline double probit_rational(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

/// Standard normal quantile sqrt(2) erfinv(2p - 1): rational start plus one
/// Halley step against the erfc-based CDF.
inline double probit(double p) {
  detail::require(p > 0.0 && p < 1.0, "probit: p must lie in (0,1)");
  double x = detail::probit_rational(p);
  // Work on the smaller tail so the residual keeps its precision.
  const double e = (p < 0.5) ? normal_cdf(x) - p : (1.0 - p) - normal_cdf(-x);
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

/// [mu - w, mu + w], w = sigma_fixed * probit((1 + confidence) / 2).
/// confidence = 0 (the eps = 1 end of a grid) gives the degenerate [mu, mu].
inline PredictionInterval gaussian_interval(double mu, const GaussianBaseline& baseline, double confidence) {
  detail::require(std::isfinite(mu), "gaussian_interval: non-finite mean");
  detail::require(confidence >= 0.0 && confidence < 1.0, "gaussian_interval: confidence must lie in [0,1)");
  const double w = confidence == 0.0 ? 0.0 : baseline.sigma_fixed() * probit(0.5 * (1.0 + confidence));
  return PredictionInterval(mu - w, mu + w, confidence);
}

inline double gaussian_cdf(double mu, const GaussianBaseline& baseline, double y) {
  return normal_cdf((y - mu) / baseline.sigma_fixed());
}

}  // namespace cqe
