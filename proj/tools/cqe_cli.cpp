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

// cqe: command-line front end.
//
// Exit codes: 0 success, 2 input-contract violation, 3 numeric degeneracy,
// 1 anything else.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "cqe/cqe.hpp"

namespace {

using namespace cqe;

constexpr int kExitContract = 2;
constexpr int kExitDegenerate = 3;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::vector<double> parse_reals(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    const auto v = parse_real(item);
    if (!v) throw ContractError(flag + ": not a number: '" + item + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw ContractError(flag + ": empty list");
  return out;
}

std::uint64_t parse_u64(const std::string& text, const std::string& flag) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ContractError(flag + ": not a non-negative integer: '" + text + "'");
  }
}

TauPolicy parse_tau(const std::string& text) {
  const auto colon = text.find(':');
  const std::string mode = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (mode == "fixed") {
    const auto v = parse_real(arg);
    if (!v) throw ContractError("--tau: expected fixed:VALUE");
    return TauPolicy::fixed(*v);
  }
  if (mode == "random") return TauPolicy::seeded_random(parse_u64(arg, "--tau"));
  throw ContractError("--tau: expected fixed:VALUE or random:SEED, got '" + text + "'");
}

SplitSpec parse_fractions(const std::string& text, std::uint64_t seed) {
  const auto f = parse_reals(text, "--fractions");
  if (f.size() != 3) throw ContractError("--fractions: expected three values a,b,c");
  SplitSpec spec{seed, f[0], f[1], f[2]};
  spec.validate();
  return spec;
}

std::string suffixed(const std::string& dir, const std::string& stem, FileFormat format) {
  return (std::filesystem::path(dir) / (stem + "." + to_string(format))).string();
}

KnnConfig knn_config(std::size_t k_regress, std::size_t k_difficulty, double beta) {
  KnnConfig cfg;
  cfg.k_regress = k_regress;
  cfg.k_difficulty = k_difficulty;
  cfg.beta = beta;
  return cfg;
}

/// Predictions for the rows of a query file, from the model's KNN or from an
/// external predictions file aligned by id.
std::vector<PointPrediction> predictions_for(const ModelBundle& bundle, const std::vector<DataRow>& rows,
                                             const std::string& predictions_path, FileFormat format,
                                             unsigned threads) {
  if (predictions_path.empty()) {
    if (!bundle.knn) throw ContractError("model has no KNN underlying model; pass --predictions");
    return predict_batch(*bundle.knn, rows, threads);
  }
  const auto external = load_predictions(predictions_path, format);
  std::unordered_map<std::string, const PointPrediction*> by_id;
  for (const auto& p : external) {
    if (!by_id.emplace(p.id(), &p).second) throw ContractError("predictions: duplicate id '" + p.id() + "'");
  }
  std::vector<PointPrediction> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    const auto it = by_id.find(r.id);
    if (it == by_id.end()) throw ContractError("predictions: no prediction for id '" + r.id + "'");
    out.push_back(*it->second);
  }
  return out;
}

std::vector<double> required_labels(const std::vector<DataRow>& rows) {
  std::vector<double> labels;
  labels.reserve(rows.size());
  for (const auto& r : rows) {
    if (!r.label) throw ContractError("row '" + r.id + "': label required");
    labels.push_back(*r.label);
  }
  return labels;
}

// -- synth -------------------------------------------------------------------

struct SynthArgs {
  std::size_t n = 5000;
  std::size_t dim = 2;
  std::string noise = "heteroscedastic";
  double sigma = 0.1;
  double sigma0 = 0.1;
  double slope = 4.0;
  std::optional<double> shift;
  std::uint64_t seed = 1;
};

void add_synth_flags(CLI::App* cmd, SynthArgs& a) {
  cmd->add_option("--n", a.n, "Number of examples")->capture_default_str();
  cmd->add_option("--dim", a.dim, "Feature dimension")->capture_default_str();
  cmd->add_option("--noise", a.noise, "homoscedastic|heteroscedastic")
      ->check(CLI::IsMember({"homoscedastic", "heteroscedastic"}))
      ->capture_default_str();
  cmd->add_option("--sigma", a.sigma, "Homoscedastic noise std")->capture_default_str();
  cmd->add_option("--sigma0", a.sigma0, "Heteroscedastic base std")->capture_default_str();
  cmd->add_option("--slope", a.slope, "Heteroscedastic slope in |x1|")->capture_default_str();
  cmd->add_option("--shift", a.shift, "Fraction of trailing examples from the shifted regime");
}

SynthSpec to_spec(const SynthArgs& a) {
  SynthSpec s;
  s.n = a.n;
  s.feature_dim = a.dim;
  s.noise = a.noise == "homoscedastic" ? SynthSpec::Noise::homoscedastic : SynthSpec::Noise::heteroscedastic;
  s.sigma = a.sigma;
  s.sigma0 = a.sigma0;
  s.slope = a.slope;
  if (a.shift) {
    s.shift = *a.shift;
  } else {
    std::cerr << "note: --shift not given, using 0\n";
  }
  s.seed = a.seed;
  return s;
}

// -- evaluation helpers --------------------------------------------------------

struct EvalInputs {
  ModelBundle bundle;
  std::vector<DataRow> rows;
  std::vector<PointPrediction> preds;
  std::vector<double> labels;
};

EvalInputs load_eval_inputs(const std::string& model_path, const std::string& input, const std::string& predictions,
                            FileFormat format, unsigned threads) {
  auto bundle = load_model(model_path);
  auto rows = load_rows(input, format, LabelColumn::required);
  auto preds = predictions_for(bundle, rows, predictions, format, threads);
  auto labels = required_labels(rows);
  return {std::move(bundle), std::move(rows), std::move(preds), std::move(labels)};
}

const GaussianBaseline& require_baseline(const ModelBundle& b) {
  if (!b.baseline) throw DegenerateError("model has no Gaussian baseline (calibration residuals were all zero)");
  return *b.baseline;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContractError("cannot open '" + path + "' for writing");
  out << text;
}

std::string sharpness_csv(const std::vector<SharpnessPoint>& curve) {
  std::ostringstream os;
  os << "confidence,mean_width,excluded_unbounded,n\n";
  for (const auto& p : curve) {
    os << format_real(p.confidence) << ',' << (p.mean_width ? format_real(*p.mean_width) : std::string("nan")) << ','
       << p.excluded_unbounded << ',' << p.n << '\n';
  }
  return os.str();
}

std::string reliability_csv(const std::vector<ReliabilityRow>& table) {
  std::ostringstream os;
  os << "epsilon,err\n";
  for (const auto& r : table) os << format_real(r.epsilon) << ',' << format_real(r.err) << '\n';
  return os.str();
}

void print_summary(const EvalReport& r) {
  const auto it = r.sharpness_at().find(0.9);
  std::cout << "method=" << r.method_name() << " n_test=" << r.n_test() << " %ECE=" << format_real(100.0 * r.ece())
            << " Sha@90%=" << (it == r.sharpness_at().end() ? std::string("n/a") : format_real(it->second))
            << " AUC@10%=" << format_real(r.auroc()) << '\n';
}

int run(int argc, char** argv) {
  CLI::App app{"Conformal predictive distributions for quality-estimation scores"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string format_name = "csv";
  unsigned threads = 1;
  app.add_option("--format", format_name, "Dataset/prediction file format: csv|jsonl")
      ->check(CLI::IsMember({"csv", "jsonl"}))
      ->capture_default_str();
  app.add_option("--threads", threads, "Worker threads (0 = all cores); never changes output")->capture_default_str();

  // synth
  SynthArgs synth_args;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic regression dataset");
  add_synth_flags(synth, synth_args);
  synth->add_option("--seed", synth_args.seed, "Generator seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output dataset file")->required();

  // split
  std::string split_input, split_out, split_fractions = "0.7,0.15,0.15", split_passthrough;
  std::uint64_t split_seed = 1;
  bool split_znorm = false;
  auto* split = app.add_subcommand("split", "Shuffle-split or passthrough-split a dataset");
  split->add_option("--input", split_input, "Labeled dataset")->required();
  split->add_option("--seed", split_seed, "Shuffle seed")->capture_default_str();
  auto* frac_opt = split->add_option("--fractions", split_fractions, "proper_train,calibration,test fractions")
                       ->capture_default_str();
  auto* pass_opt = split->add_option("--passthrough", split_passthrough, "Unshuffled boundaries m,n");
  pass_opt->excludes(frac_opt);
  split->add_flag("--znormalize", split_znorm, "Z-normalize labels over the whole dataset first");
  split->add_option("--out", split_out, "Output directory")->required();

  // fit
  std::string fit_train, fit_calib, fit_calib_preds, fit_out;
  std::size_t k_regress = 10, k_difficulty = 25;
  double beta = 1e-6;
  auto* fit = app.add_subcommand("fit", "Fit the KNN underlying model and the conformal calibration");
  fit->add_option("--train", fit_train, "Proper training set");
  fit->add_option("--calib", fit_calib, "Calibration set")->required();
  fit->add_option("--calib-predictions", fit_calib_preds,
                  "External predictions for the calibration set (skips the KNN model)");
  fit->add_option("--k-regress", k_regress, "Neighbours for the label prediction")->capture_default_str();
  fit->add_option("--k-difficulty", k_difficulty, "Neighbours for the difficulty estimate")->capture_default_str();
  fit->add_option("--beta", beta, "Difficulty floor")->capture_default_str();
  fit->add_option("--out", fit_out, "Output model file (JSON)")->required();

  // shared by predict / evaluate / reliability / sharpness-curve
  std::string model_path, input_path, predictions_path, out_path, cdf_dump, epsilons = "0.1";
  std::string tau_text = "fixed:0.5", method = "cpd", sharpness_levels = "0.9";
  double grid_step = 0.02;
  const auto add_query_flags = [&](CLI::App* cmd) {
    cmd->add_option("--model", model_path, "Model file from `fit`")->required();
    cmd->add_option("--input", input_path, "Test dataset")->required();
    cmd->add_option("--predictions", predictions_path, "External predictions for the test set");
    cmd->add_option("--out", out_path, "Output file")->required();
  };
  const auto add_method_flags = [&](CLI::App* cmd) {
    cmd->add_option("--method", method, "cpd|gaussian")->check(CLI::IsMember({"cpd", "gaussian"}))->capture_default_str();
    cmd->add_option("--grid-step", grid_step, "Significance grid step")->capture_default_str();
    cmd->add_option("--tau", tau_text, "fixed:VALUE or random:SEED")->capture_default_str();
  };

  auto* predict = app.add_subcommand("predict", "Predictive distributions and intervals for a test set");
  add_query_flags(predict);
  predict->add_option("--epsilons", epsilons, "Significance levels for the intervals")->capture_default_str();
  predict->add_option("--tau", tau_text, "fixed:VALUE or random:SEED")->capture_default_str();
  predict->add_option("--cdf-dump", cdf_dump, "Write per-example thresholds + tau as JSONL");

  auto* evaluate = app.add_subcommand("evaluate", "ECE, sharpness and AUROC report");
  add_query_flags(evaluate);
  add_method_flags(evaluate);
  evaluate->add_option("--sharpness-levels", sharpness_levels, "Confidence levels for sharpness")->capture_default_str();

  auto* reliability = app.add_subcommand("reliability", "Per-level error-rate table (epsilon, err)");
  add_query_flags(reliability);
  add_method_flags(reliability);

  auto* sharp = app.add_subcommand("sharpness-curve", "Mean interval width per confidence level");
  add_query_flags(sharp);
  add_method_flags(sharp);

  // shuffle-study
  SynthArgs study_args;
  std::string study_seeds = "1,2,3", study_fractions = "0.4,0.2,0.4", study_out;
  auto* study = app.add_subcommand("shuffle-study", "Passthrough vs shuffled splits on synthetic data");
  add_synth_flags(study, study_args);
  study->add_option("--seeds", study_seeds, "Comma-separated seeds")->capture_default_str();
  study->add_option("--fractions", study_fractions, "proper_train,calibration,test fractions")->capture_default_str();
  study->add_option("--k-regress", k_regress, "Neighbours for the label prediction")->capture_default_str();
  study->add_option("--k-difficulty", k_difficulty, "Neighbours for the difficulty estimate")->capture_default_str();
  study->add_option("--grid-step", grid_step, "Significance grid step")->capture_default_str();
  study->add_option("--out", study_out, "Output table (CSV)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitContract;
  }

  const FileFormat format = parse_file_format(format_name);

  if (synth->parsed()) {
    const auto data = synth_generate(to_spec(synth_args));
    save_examples(synth_out, data, format);
    return 0;
  }

  if (split->parsed()) {
    auto data = load_examples(split_input, format);
    if (split_znorm) {
      double mu = 0.0, sigma = 0.0;
      data = znormalize_labels(data, &mu, &sigma);
      std::cerr << "z-normalized labels: mu=" << format_real(mu) << " sigma=" << format_real(sigma) << '\n';
    }
    Split parts;
    if (!split_passthrough.empty()) {
      const auto b = split_list(split_passthrough);
      if (b.size() != 2) throw ContractError("--passthrough: expected m,n");
      parts = passthrough_split(data, parse_u64(b[0], "--passthrough"), parse_u64(b[1], "--passthrough"));
    } else {
      parts = shuffle_split(data, parse_fractions(split_fractions, split_seed));
    }
    std::filesystem::create_directories(split_out);
    save_examples(suffixed(split_out, "train", format), parts.proper_train, format);
    save_examples(suffixed(split_out, "calib", format), parts.calibration, format);
    save_examples(suffixed(split_out, "test", format), parts.test, format);
    std::cout << "train=" << parts.proper_train.size() << " calib=" << parts.calibration.size()
              << " test=" << parts.test.size() << '\n';
    return 0;
  }

  if (fit->parsed()) {
    auto calib = load_examples(fit_calib, format);
    Provenance prov;
    prov["calib_file"] = fit_calib;
    prov["calib_digest"] = file_digest(fit_calib);
    ModelBundle bundle = [&] {
      if (!fit_calib_preds.empty()) {
        prov["calib_predictions_file"] = fit_calib_preds;
        prov["calib_predictions_digest"] = file_digest(fit_calib_preds);
        const auto preds = load_predictions(fit_calib_preds, format);
        return fit_bundle_from_predictions(preds, calib, prov);
      }
      if (fit_train.empty()) throw ContractError("fit: --train is required unless --calib-predictions is given");
      prov["train_file"] = fit_train;
      prov["train_digest"] = file_digest(fit_train);
      prov["k_regress"] = std::to_string(k_regress);
      prov["k_difficulty"] = std::to_string(k_difficulty);
      prov["beta"] = format_real(beta);
      return fit_bundle(load_examples(fit_train, format), calib, knn_config(k_regress, k_difficulty, beta), threads,
                        prov);
    }();
    if (!bundle.baseline) std::cerr << "warning: calibration residuals are all zero; no Gaussian baseline stored\n";
    save_model(fit_out, bundle);
    return 0;
  }

  if (predict->parsed()) {
    const auto bundle = load_model(model_path);
    const auto rows = load_rows(input_path, format, LabelColumn::optional);
    const auto preds = predictions_for(bundle, rows, predictions_path, format, threads);
    const auto eps = parse_reals(epsilons, "--epsilons");
    const auto tau = parse_tau(tau_text);
    const auto dists = predictive_distributions(bundle.conformal, preds, tau, threads);
    const bool labeled = rows.front().label.has_value();

    std::ostringstream os;
    os << "id,y_hat,sigma_hat,tau";
    for (const double e : eps) os << ",lower_" << format_real(e) << ",upper_" << format_real(e);
    if (labeled) os << ",label,cdf_at_label";
    os << '\n';
    for (std::size_t j = 0; j < rows.size(); ++j) {
      os << preds[j].id() << ',' << format_real(preds[j].y_hat()) << ',' << format_real(preds[j].sigma_hat()) << ','
         << format_real(dists[j].tau());
      for (const double e : eps) {
        const auto iv = interval(dists[j], e);
        os << ',' << format_real(iv.lower()) << ',' << format_real(iv.upper());
      }
      if (labeled) {
        if (!rows[j].label) throw ContractError("row '" + rows[j].id + "': missing label");
        os << ',' << format_real(*rows[j].label) << ',' << format_real(cdf_value(dists[j], *rows[j].label));
      }
      os << '\n';
    }
    write_text(out_path, os.str());

    if (!cdf_dump.empty()) {
      std::ostringstream dump;
      for (std::size_t j = 0; j < rows.size(); ++j) {
        nlohmann::ordered_json obj;
        obj["id"] = preds[j].id();
        obj["y_hat"] = preds[j].y_hat();
        obj["sigma_hat"] = preds[j].sigma_hat();
        obj["tau"] = dists[j].tau();
        obj["thresholds"] = std::vector<double>(dists[j].thresholds().begin(), dists[j].thresholds().end());
        dump << obj.dump() << '\n';
      }
      write_text(cdf_dump, dump.str());
    }
    return 0;
  }

  if (evaluate->parsed() || reliability->parsed() || sharp->parsed()) {
    const auto in = load_eval_inputs(model_path, input_path, predictions_path, format, threads);
    EvalOptions opt;
    opt.grid = SignificanceGrid::uniform(grid_step);
    opt.tau = parse_tau(tau_text);
    opt.threads = threads;
    opt.sharpness_levels = parse_reals(sharpness_levels, "--sharpness-levels");

    if (evaluate->parsed()) {
      Provenance prov;
      prov["model_digest"] = file_digest(model_path);
      prov["input_digest"] = file_digest(input_path);
      if (!predictions_path.empty()) prov["predictions_digest"] = file_digest(predictions_path);
      prov["grid_step"] = format_real(grid_step);
      for (const auto& [k, v] : in.bundle.conformal.provenance()) prov["model." + k] = v;
      const EvalReport report = method == "cpd"
                                    ? evaluate_cpd(in.bundle.conformal, in.preds, in.labels, opt, prov)
                                    : evaluate_gaussian(require_baseline(in.bundle), in.preds, in.labels, opt, prov);
      save_report(out_path, report);
      print_summary(report);
      return 0;
    }

    std::vector<PredictiveDistribution> dists;
    if (method == "cpd") dists = predictive_distributions(in.bundle.conformal, in.preds, opt.tau, threads);
    const auto with_provider = [&](auto&& body) {
      if (method == "cpd") return body(cpd_interval_provider(dists));
      return body(gaussian_interval_provider(require_baseline(in.bundle), in.preds));
    };
    if (reliability->parsed()) {
      write_text(out_path, with_provider([&](auto provider) {
                   return reliability_csv(reliability_table(provider, in.labels, opt.grid));
                 }));
    } else {
      write_text(out_path, with_provider([&](auto provider) { return sharpness_csv(sharpness_curve(provider, opt.grid)); }));
    }
    return 0;
  }

  if (study->parsed()) {
    std::vector<std::uint64_t> seeds;
    for (const auto& s : split_list(study_seeds)) seeds.push_back(parse_u64(s, "--seeds"));
    if (seeds.empty()) throw ContractError("--seeds: empty list");
    EvalOptions opt;
    opt.grid = SignificanceGrid::uniform(grid_step);
    opt.threads = threads;
    const auto rows = shuffle_study(to_spec(study_args), seeds, parse_fractions(study_fractions, 1),
                                    knn_config(k_regress, k_difficulty, beta), opt);
    std::ostringstream os;
    os << "seed,split,method,ece_percent,sharpness_90,excluded_90,auroc\n";
    std::map<std::string, std::vector<double>> ece_by;
    for (const auto& r : rows) {
      for (const EvalReport* rep : {&r.result.cpd, &r.result.gaussian}) {
        const auto w = rep->sharpness_at().find(0.9);
        os << r.seed << ',' << r.split << ',' << rep->method_name() << ',' << format_real(100.0 * rep->ece()) << ','
           << (w == rep->sharpness_at().end() ? std::string("nan") : format_real(w->second)) << ','
           << rep->sharpness_excluded().at(0.9) << ',' << format_real(rep->auroc()) << '\n';
        ece_by[r.split + "/" + rep->method_name()].push_back(100.0 * rep->ece());
      }
    }
    write_text(study_out, os.str());
    for (const auto& [key, values] : ece_by) {
      double mean = 0.0;
      for (const double v : values) mean += v;
      std::cout << key << " mean %ECE=" << format_real(mean / static_cast<double>(values.size())) << '\n';
    }
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const cqe::ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitContract;
  } catch (const cqe::DegenerateError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
