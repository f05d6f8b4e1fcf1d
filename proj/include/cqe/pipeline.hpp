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

// End-to-end composition: fit the underlying KNN, calibrate, build
// per-object predictive distributions and score both methods.
//
// Per-object work runs on a worker pool; every result slot is written by
// exactly one worker and all reductions happen afterwards in index order,
// so the thread count never changes any output bit.

#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cqe/baseline.hpp"
#include "cqe/conformity.hpp"
#include "cqe/core_types.hpp"
#include "cqe/data_io.hpp"
#include "cqe/knn.hpp"
#include "cqe/metrics.hpp"
#include "cqe/predictive.hpp"

namespace cqe {

/// Calls fn(i) for i in [0, n) on up to `threads` workers (0 = hardware).
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(threads, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = n * w / workers;
      const std::size_t end = n * (w + 1) / workers;
      pool.emplace_back([&, begin, end] {
        try {
          for (std::size_t i = begin; i < end; ++i) fn(i);
        } catch (...) {
          const std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

inline std::vector<PointPrediction> predict_batch(const FittedKnn& knn, std::span<const DataRow> rows,
                                                  unsigned threads = 1) {
  std::vector<std::optional<PointPrediction>> slots(rows.size());
  parallel_for(rows.size(), threads, [&](std::size_t i) { slots[i] = knn.point_prediction(rows[i].id, rows[i].features); });
  std::vector<PointPrediction> out;
  out.reserve(rows.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline std::vector<PointPrediction> predict_batch(const FittedKnn& knn, std::span<const LabeledExample> examples,
                                                  unsigned threads = 1) {
  std::vector<std::optional<PointPrediction>> slots(examples.size());
  parallel_for(examples.size(), threads,
               [&](std::size_t i) { slots[i] = knn.point_prediction(examples[i].id(), examples[i].features()); });
  std::vector<PointPrediction> out;
  out.reserve(examples.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline std::vector<double> y_hats(std::span<const PointPrediction> preds) {
  std::vector<double> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(p.y_hat());
  return out;
}

/// Gaussian baseline fitted on the calibration (validation) residuals, or
/// nullopt when they are all zero.
inline std::optional<GaussianBaseline> try_fit_baseline(std::span<const PointPrediction> preds,
                                                        std::span<const double> labels) {
  try {
    return fit_sigma_fixed(labels, y_hats(preds));
  } catch (const DegenerateError&) {
    return std::nullopt;
  }
}

/// KNN on the proper training set, calibration residuals from its
/// predictions on the calibration set.
inline ModelBundle fit_bundle(std::vector<LabeledExample> train, std::span<const LabeledExample> calib,
                              const KnnConfig& config, unsigned threads = 1, Provenance provenance = {}) {
  detail::require(!calib.empty(), "fit: empty calibration set");
  FittedKnn knn(std::move(train), config);
  if (uniform_dimension(calib) != knn.dim()) throw ContractError("fit: calibration and training dimensions differ");
  const auto preds = predict_batch(knn, calib, threads);
  auto conformal = fit_conformal(preds, calib, knn.dim(), std::move(provenance));
  const auto labels = labels_of(calib);
  return ModelBundle{std::move(conformal), std::move(knn), try_fit_baseline(preds, labels)};
}

/// Underlying-model-agnostic calibration from externally produced predictions.
inline ModelBundle fit_bundle_from_predictions(std::span<const PointPrediction> calib_preds,
                                               std::span<const LabeledExample> calib, Provenance provenance = {}) {
  const std::size_t d = uniform_dimension(calib);
  auto conformal = fit_conformal(calib_preds, calib, d, std::move(provenance));
  return ModelBundle{std::move(conformal), std::nullopt, try_fit_baseline(calib_preds, labels_of(calib))};
}

inline std::vector<PredictiveDistribution> predictive_distributions(const ConformalModel& model,
                                                                    std::span<const PointPrediction> preds,
                                                                    const TauPolicy& tau, unsigned threads = 1) {
  std::vector<std::optional<PredictiveDistribution>> slots(preds.size());
  parallel_for(preds.size(), threads,
               [&](std::size_t j) { slots[j] = make_distribution(model, preds[j], draw_tau(tau, j)); });
  std::vector<PredictiveDistribution> out;
  out.reserve(preds.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

/// Q_j(y_j) for each test object: the values the validity property says are U(0,1).
inline std::vector<double> pit_values(std::span<const PredictiveDistribution> dists, std::span<const double> labels) {
  detail::require(dists.size() == labels.size(), "pit_values: distribution and label counts differ");
  std::vector<double> out(labels.size());
  for (std::size_t j = 0; j < labels.size(); ++j) out[j] = cdf_value(dists[j], labels[j]);
  return out;
}

inline auto cpd_interval_provider(std::span<const PredictiveDistribution> dists) {
  return [dists](double eps) {
    std::vector<PredictionInterval> out;
    out.reserve(dists.size());
    for (const auto& d : dists) out.push_back(interval(d, eps));
    return out;
  };
}

inline auto gaussian_interval_provider(const GaussianBaseline& baseline, std::span<const PointPrediction> preds) {
  return [baseline, preds](double eps) {
    std::vector<PredictionInterval> out;
    out.reserve(preds.size());
    for (const auto& p : preds) out.push_back(gaussian_interval(p.y_hat(), baseline, 1.0 - eps));
    return out;
  };
}

struct SharpnessPoint {
  double confidence;
  std::optional<double> mean_width;  // nullopt when every interval is unbounded
  std::size_t excluded_unbounded;
  std::size_t n;
};

template <typename Provider>
SharpnessPoint sharpness_point(Provider&& provider, double confidence) {
  const auto intervals = provider(1.0 - confidence);
  try {
    const auto s = sharpness(intervals);
    return {confidence, s.mean_width, s.excluded_unbounded, intervals.size()};
  } catch (const DegenerateError&) {
    return {confidence, std::nullopt, intervals.size(), intervals.size()};
  }
}

/// Mean width at each confidence 1 - eps, eps over the grid.
template <typename Provider>
std::vector<SharpnessPoint> sharpness_curve(Provider&& provider, const SignificanceGrid& grid) {
  std::vector<SharpnessPoint> out;
  for (const double eps : grid.levels()) out.push_back(sharpness_point(provider, 1.0 - eps));
  return out;
}

struct EvalOptions {
  SignificanceGrid grid = SignificanceGrid::uniform(0.02);
  std::vector<double> sharpness_levels{0.9};
  TauPolicy tau = TauPolicy::fixed(0.5);
  unsigned threads = 1;
};

namespace detail {

template <typename Provider, typename FailureScore>
EvalReport assemble_report(std::string method, Provider&& provider, FailureScore&& failure_score,
                           std::span<const double> labels, const EvalOptions& opt, Provenance provenance) {
  detail::require(!labels.empty(), "evaluate: empty test set");
  EvalReportFields f;
  f.method_name = std::move(method);
  f.n_test = labels.size();
  f.ece = ece(provider, labels, opt.grid);
  for (const double level : opt.sharpness_levels) {
    const auto sp = sharpness_point(provider, level);
    f.sharpness_excluded[level] = sp.excluded_unbounded;
    if (sp.mean_width) f.sharpness_at[level] = *sp.mean_width;
  }
  const auto decile = bottom_decile_flags(labels);
  f.decile_threshold = decile.threshold;
  std::vector<double> scores(labels.size());
  for (std::size_t j = 0; j < labels.size(); ++j) scores[j] = failure_score(j, decile.threshold);
  f.auroc = decile.degenerate ? 0.5 : auroc(scores, decile.flags);
  provenance["grid_levels"] = std::to_string(opt.grid.size());
  provenance["grid_first"] = format_real(opt.grid.levels().front());
  if (decile.degenerate) provenance["warning"] = "all test labels tied at the decile threshold";
  f.provenance = std::move(provenance);
  return EvalReport(std::move(f));
}

}  // namespace detail

inline EvalReport evaluate_cpd(const ConformalModel& model, std::span<const PointPrediction> preds,
                               std::span<const double> labels, const EvalOptions& opt, Provenance provenance = {}) {
  detail::require(preds.size() == labels.size(), "evaluate: prediction and label counts differ");
  const auto dists = predictive_distributions(model, preds, opt.tau, opt.threads);
  provenance["tau"] = opt.tau.to_string();
  return detail::assemble_report(
      "cpd", cpd_interval_provider(dists), [&](std::size_t j, double t) { return p_below(dists[j], t); }, labels, opt,
      std::move(provenance));
}

inline EvalReport evaluate_gaussian(const GaussianBaseline& baseline, std::span<const PointPrediction> preds,
                                    std::span<const double> labels, const EvalOptions& opt,
                                    Provenance provenance = {}) {
  detail::require(preds.size() == labels.size(), "evaluate: prediction and label counts differ");
  provenance["sigma_fixed"] = format_real(baseline.sigma_fixed());
  return detail::assemble_report(
      "gaussian", gaussian_interval_provider(baseline, preds),
      [&](std::size_t j, double t) { return gaussian_cdf(preds[j].y_hat(), baseline, t); }, labels, opt,
      std::move(provenance));
}

struct ExperimentResult {
  EvalReport cpd;
  EvalReport gaussian;
  std::vector<double> pit;  // Q_j(y_j) under opt.tau
  /// Empirical coverage per requested sharpness confidence level.
  std::map<double, double> coverage;
};

/// Fit on split.proper_train + split.calibration, evaluate on split.test.
inline ExperimentResult run_experiment(const Split& split, const KnnConfig& config, const EvalOptions& opt) {
  auto bundle = fit_bundle(split.proper_train, split.calibration, config, opt.threads);
  if (!bundle.baseline) throw DegenerateError("experiment: calibration residuals are all zero");
  const auto preds = predict_batch(*bundle.knn, split.test, opt.threads);
  const auto labels = labels_of(split.test);
  const auto dists = predictive_distributions(bundle.conformal, preds, opt.tau, opt.threads);
  std::map<double, double> coverage;
  for (const double level : opt.sharpness_levels) {
    coverage[level] = 1.0 - error_rate(cpd_interval_provider(dists)(1.0 - level), labels);
  }
  return ExperimentResult{evaluate_cpd(bundle.conformal, preds, labels, opt),
                          evaluate_gaussian(*bundle.baseline, preds, labels, opt), pit_values(dists, labels),
                          std::move(coverage)};
}

struct ShuffleStudyRow {
  std::uint64_t seed;
  std::string split;  // "passthrough" or "shuffled"
  ExperimentResult result;
};

/// Per seed: generate data, evaluate on file-order contiguous splits and on
/// a seeded shuffle with the same split sizes.
inline std::vector<ShuffleStudyRow> shuffle_study(SynthSpec synth, std::span<const std::uint64_t> seeds,
                                                  SplitSpec fractions, const KnnConfig& config,
                                                  const EvalOptions& opt) {
  std::vector<ShuffleStudyRow> rows;
  for (const auto seed : seeds) {
    synth.seed = seed;
    const auto data = synth_generate(synth);
    fractions.seed = seed;
    fractions.validate();
    const auto n = static_cast<double>(data.size());
    const auto m1 = static_cast<std::size_t>(std::floor(detail::snap_integral(fractions.proper_train * n)));
    const auto m2 = m1 + static_cast<std::size_t>(std::floor(detail::snap_integral(fractions.calibration * n)));
    rows.push_back({seed, "passthrough", run_experiment(passthrough_split(data, m1, m2), config, opt)});
    rows.push_back({seed, "shuffled", run_experiment(shuffle_split(data, fractions), config, opt)});
  }
  return rows;
}

}  // namespace cqe
