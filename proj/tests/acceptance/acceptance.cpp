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

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "cqe/cqe.hpp"
#include "support/oracles.hpp"

namespace {

using namespace cqe;

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;  // 0 = no limit
  std::function<Outcome()> body;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome transducer_equivalence() {
  std::mt19937_64 gen(20260101);
  std::uniform_int_distribution<std::size_t> size(1, 20);
  std::uniform_int_distribution<int> cell(-6, 6);
  std::uniform_int_distribution<int> coin(0, 1);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> scale(0.05, 4.0);
  std::size_t checks = 0, mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = size(gen);
    // Half the instances draw from a coarse lattice so ties are certain.
    std::vector<double> r(n);
    for (auto& v : r) v = coin(gen) ? cell(gen) * 0.25 : z(gen);
    r[gen() % n] = r[gen() % n];
    std::sort(r.begin(), r.end());
    const ConformalModel model(r, 1);
    const PointPrediction unit("t", 0.0, 1.0);
    const PointPrediction general("t", z(gen), scale(gen));
    for (const auto* pred : {&unit, &general}) {
      const auto c = calibration_scores(model, *pred);
      std::vector<double> ys(c.begin(), c.end());
      for (std::size_t i = 0; i + 1 < c.size(); ++i) ys.push_back(0.5 * (c[i] + c[i + 1]));
      ys.push_back(-10.0);
      ys.push_back(10.0);
      for (const double tau : {0.0, 0.5, 1.0}) {
        const auto dist = make_distribution(model, *pred, tau);
        for (const double y : ys) {
          ++checks;
          if (cdf_value(dist, y) != transducer_q(c, y, tau)) ++mismatches;
          // In residual space (y_hat = 0, sigma_hat = 1) the conformity scores
          // are the stored residuals themselves.
          if (pred == &unit) {
            ++checks;
            if (cdf_value(dist, y) != transducer_q(r, conformity_score(unit, y), tau)) ++mismatches;
          }
        }
      }
    }
  }
  return {mismatches == 0, std::to_string(checks) + " comparisons, " + std::to_string(mismatches) + " mismatches"};
}

// Shared setup for validity, coverage and calibration ordering.
struct SeedRun {
  std::uint64_t seed;
  ExperimentResult result;
};

const std::vector<SeedRun>& heteroscedastic_runs() {
  static const std::vector<SeedRun> runs = [] {
    std::vector<SeedRun> out;
    for (const std::uint64_t seed : {1, 2, 3}) {
      SynthSpec spec;
      spec.n = 5000;
      spec.noise = SynthSpec::Noise::heteroscedastic;
      spec.sigma0 = 0.1;
      spec.slope = 4.0;
      spec.seed = seed;
      SplitSpec fr;
      fr.seed = seed;
      fr.proper_train = 0.4;
      fr.calibration = 0.2;
      fr.test = 0.4;
      const auto split = shuffle_split(synth_generate(spec), fr);
      EvalOptions opt;
      opt.tau = TauPolicy::seeded_random(seed);
      opt.sharpness_levels = {0.8, 0.9, 0.95};
      out.push_back({seed, run_experiment(split, KnnConfig{}, opt)});
    }
    return out;
  }();
  return runs;
}

Outcome validity() {
  int passes = 0;
  std::string detail = "KS p-values:";
  for (const auto& run : heteroscedastic_runs()) {
    const auto ks = oracle::ks_uniform(run.result.pit);
    passes += ks.p_value > 0.01 ? 1 : 0;
    detail += " seed" + std::to_string(run.seed) + "=" + fmt(ks.p_value) + " (D=" + fmt(ks.statistic) + ")";
  }
  return {passes >= 2, detail + "; " + std::to_string(passes) + "/3 pass at alpha=0.01"};
}

Outcome coverage() {
  bool ok = true;
  std::string detail = "coverage:";
  for (const auto& run : heteroscedastic_runs()) {
    detail += " seed" + std::to_string(run.seed) + "{";
    for (const auto& [level, cov] : run.result.coverage) {
      const bool in = std::abs(cov - level) <= 0.02 + 1e-12;
      ok = ok && in;
      detail += fmt(level) + ":" + fmt(cov) + (in ? "" : "!") + " ";
    }
    detail.back() = '}';
  }
  return {ok, detail};
}

Outcome calibration_ordering() {
  int wins = 0;
  std::string detail = "%ECE cpd vs gaussian:";
  for (const auto& run : heteroscedastic_runs()) {
    const double c = run.result.cpd.ece(), g = run.result.gaussian.ece();
    wins += c < g ? 1 : 0;
    detail += " seed" + std::to_string(run.seed) + "=" + fmt(100 * c) + "/" + fmt(100 * g);
  }
  return {wins >= 2, detail + "; cpd better in " + std::to_string(wins) + "/3"};
}

Outcome shuffle_study_outcome() {
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  SplitSpec fr;
  fr.proper_train = 0.4;
  fr.calibration = 0.2;
  fr.test = 0.4;
  EvalOptions opt;
  const auto study = [&](double shift) {
    SynthSpec spec;
    spec.n = 5000;
    spec.shift = shift;
    // passthrough minus shuffled CPD ECE, per seed
    std::vector<double> gaps;
    const auto rows = shuffle_study(spec, seeds, fr, KnnConfig{}, opt);
    for (std::size_t i = 0; i + 1 < rows.size(); i += 2) gaps.push_back(rows[i].result.cpd.ece() - rows[i + 1].result.cpd.ece());
    return gaps;
  };
  const auto shifted = study(0.3);
  const auto control = study(0.0);
  int shifted_ok = 0;
  bool control_ok = true;
  std::string detail = "passthrough-shuffled CPD %ECE gap, shift=0.3:";
  for (const double g : shifted) {
    shifted_ok += g >= 0.01 ? 1 : 0;
    detail += " " + fmt(100 * g);
  }
  detail += "; shift=0:";
  for (const double g : control) {
    control_ok = control_ok && std::abs(g) < 0.02;
    detail += " " + fmt(100 * g);
  }
  return {shifted_ok >= 2 && control_ok, detail};
}

Outcome probit_accuracy() {
  double worst = 0.0;
  const int points = 10000;
  const double lo = 1e-6, hi = 1.0 - 1e-6;
  for (int i = 0; i < points; ++i) {
    const double p = lo + (hi - lo) * i / (points - 1);
    worst = std::max(worst, std::abs(probit(p) - oracle::bisection_probit(p)));
  }
  const double at975 = probit(0.975);
  const bool ok = worst < 1e-6 && std::abs(at975 - 1.959964) <= 1e-6;
  return {ok, "max |err|=" + fmt(worst) + ", probit(0.975)=" + std::to_string(at975)};
}

Outcome auroc_oracle() {
  std::mt19937_64 gen(77);
  std::size_t mismatches = 0;
  const auto check = [&](const std::vector<double>& s, const std::vector<int>& f, double expected = -1.0) {
    const double a = auroc(s, f);
    if (a != oracle::pairwise_auroc(s, f) || (expected >= 0.0 && a != expected)) ++mismatches;
  };
  check({0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0}, 1.0);
  check({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}, 0.0);
  check({0.5, 0.5, 0.5, 0.5}, {1, 1, 0, 0}, 0.5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + gen() % 499;
    std::vector<double> s(n);
    std::vector<int> f(n);
    const int levels = 1 + static_cast<int>(gen() % 40);
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = static_cast<int>(gen() % 4 == 0);
      s[i] = static_cast<double>(gen() % levels);
    }
    f[0] = 1;
    f[1] = 0;
    switch (trial % 10) {
      case 0:  // all tied
        std::fill(s.begin(), s.end(), 0.25);
        check(s, f, 0.5);
        break;
      case 1:  // perfect separation
        for (std::size_t i = 0; i < n; ++i) s[i] = f[i] ? 2.0 + i : -1.0 - i;
        check(s, f, 1.0);
        break;
      case 2:  // perfect anti-separation
        for (std::size_t i = 0; i < n; ++i) s[i] = f[i] ? -1.0 - i : 2.0 + i;
        check(s, f, 0.0);
        break;
      default:
        check(s, f);
    }
  }
  return {mismatches == 0, "203 instances, " + std::to_string(mismatches) + " mismatches"};
}

Outcome hand_examples() {
  std::vector<std::string> failed;
  const auto near = [&](const std::string& what, double got, double want) {
    if (!(std::abs(got - want) <= 1e-9)) failed.push_back(what + "=" + std::to_string(got));
  };
  const ConformalModel m({-0.4, 0.5, 0.5}, 1);
  const auto c = calibration_scores(m, PointPrediction("t", 1.0, 1.0));
  near("C1", c[0], 0.6);
  near("C2", c[1], 1.5);
  near("C3", c[2], 1.5);

  const std::vector<PointPrediction> preds = {{"a", 0.5, 1.0}, {"b", 0.2, 0.5}, {"c", 1.0, 2.0}};
  const auto fitted = fit_conformal(preds, std::vector<double>{1.0, 0.0, 2.0});
  near("r1", fitted.residuals()[0], -0.4);
  near("r2", fitted.residuals()[1], 0.5);
  near("r3", fitted.residuals()[2], 0.5);
  const auto c2 = calibration_scores(m, PointPrediction("t", 0.0, 2.0));
  near("C'1", c2[0], -0.8);
  near("C'2", c2[1], 1.0);

  const PredictiveDistribution d(c, 0.5);
  near("Q(1.0)", cdf_value(d, 1.0), 0.375);
  near("Q(1.5)", cdf_value(d, 1.5), 0.625);
  near("Q(-10)", cdf_value(d, -10.0), 0.125);
  near("Q(10)", cdf_value(d, 10.0), 0.875);
  near("transducer", transducer_q(std::vector<double>{0.5, -0.4, 0.5}, 0.0, 0.5), 0.375);
  near("quantile(0.5)", quantile(d, 0.5), 1.5);
  near("quantile(0.24)", quantile(d, 0.24), 0.6);

  const std::vector<double> labels(50, 0.0);
  const auto provider = [](double eps) {
    const std::size_t misses = eps == 0.1 ? 6 : 23;
    std::vector<PredictionInterval> out;
    for (std::size_t i = 0; i < 50; ++i) out.emplace_back(i < misses ? 1.0 : -1.0, i < misses ? 2.0 : 1.0, 1.0 - eps);
    return out;
  };
  near("ECE", ece(provider, labels, SignificanceGrid({0.1, 0.5})), 0.03);

  const auto zn = znormalize(std::vector<double>{0, 50, 100});
  near("z0", zn.labels[0], -std::sqrt(1.5));
  near("z1", zn.labels[1], 0.0);
  near("z2", zn.labels[2], std::sqrt(1.5));
  near("z-mu", zn.mu, 50.0);
  near("z-sigma", zn.sigma, std::sqrt(5000.0 / 3.0));
  if (std::abs(zn.labels[0] + 1.2247) > 5e-5) failed.push_back("z0 4dp");

  std::vector<LabeledExample> line3;
  for (int i = 0; i < 3; ++i) line3.emplace_back("p" + std::to_string(i), std::vector<double>{double(i)}, double(i));
  KnnConfig kc;
  kc.k_regress = 2;
  kc.k_difficulty = 1;
  near("knn predict", fit_knn(line3, kc).predict(std::vector<double>{0.1}), 0.5);
  std::vector<LabeledExample> line4;
  for (int i = 0; i < 4; ++i) line4.emplace_back("p" + std::to_string(i), std::vector<double>{double(i)}, 0.0);
  kc.k_regress = 1;
  kc.k_difficulty = 2;
  kc.beta = 0.01;
  near("difficulty", fit_knn(line4, kc).difficulty(std::vector<double>{1.5}), 1.01);

  std::vector<double> c19(19);
  for (int i = 0; i < 19; ++i) c19[i] = i + 1;
  const PredictiveDistribution d19(c19, 0.5);
  near("iv(0.2).lo", interval(d19, 0.2).lower(), 2);
  near("iv(0.2).hi", interval(d19, 0.2).upper(), 18);
  near("iv(0.9).lo", interval(d19, 0.9).lower(), 9);
  near("iv(0.9).hi", interval(d19, 0.9).upper(), 11);

  near("sigma(1,-1,1,-1)", fit_sigma_fixed(std::vector<double>{1, -1, 1, -1}, std::vector<double>{0, 0, 0, 0}).sigma_fixed(), 1.0);
  near("sigma(2,0)", fit_sigma_fixed(std::vector<double>{2, 0}, std::vector<double>{0, 0}).sigma_fixed(), std::sqrt(2.0));
  near("probit(0.975)", probit(0.975), oracle::bisection_probit(0.975));
  near("probit(0.95)", probit(0.95), oracle::bisection_probit(0.95));
  const auto giv = gaussian_interval(5.0, GaussianBaseline(2.0), 0.9);
  near("gauss.hi", giv.upper(), 5.0 + 2.0 * oracle::bisection_probit(0.95));
  near("gauss_cdf", gaussian_cdf(0.0, GaussianBaseline(1.0), oracle::bisection_probit(0.975)), 0.975);

  std::vector<double> ten(10);
  for (int i = 0; i < 10; ++i) ten[i] = i + 1;
  near("decile", bottom_decile_flags(ten).threshold, 1.9);
  std::vector<double> hundred(100);
  for (int i = 0; i < 100; ++i) hundred[i] = i + 1;
  const auto hf = bottom_decile_flags(hundred).flags;
  near("decile count", std::accumulate(hf.begin(), hf.end(), 0), 10);

  std::string detail = failed.empty() ? "all examples agree to 1e-9" : "failed:";
  for (const auto& f : failed) detail += " " + f;
  return {failed.empty(), detail};
}

// CLI determinism ----------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(CQE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const auto dir = oracle::temp_dir("accept");
  const auto p = [&](const std::string& n) { return (dir / n).string(); };
  if (cli("synth --n 3000 --seed 5 --shift 0 --out " + p("data.csv")) != 0 ||
      cli("split --input " + p("data.csv") + " --seed 5 --fractions 0.4,0.2,0.4 --out " + p("split")) != 0) {
    return {false, "could not prepare data"};
  }
  std::vector<std::string> outputs[3];
  const char* thread_flags[3] = {"--threads 1", "--threads 1", "--threads 4"};
  for (int rep = 0; rep < 3; ++rep) {
    const std::string tag = std::to_string(rep);
    const std::string t = std::string(" ") + thread_flags[rep] + " ";
    const std::string model = p("model" + tag + ".json");
    int rc = cli(t + "fit --train " + p("split/train.csv") + " --calib " + p("split/calib.csv") + " --out " + model);
    // Same model path per run keeps provenance identical; copy to compare.
    rc |= cli(t + "predict --model " + model + " --input " + p("split/test.csv") +
              " --epsilons 0.05,0.1,0.2,0.5 --tau random:9 --out " + p("pred" + tag + ".csv") + " --cdf-dump " +
              p("dump" + tag + ".jsonl"));
    rc |= cli(t + "evaluate --model " + model + " --input " + p("split/test.csv") + " --out " + p("rep" + tag + ".json"));
    rc |= cli(t + "evaluate --method gaussian --model " + model + " --input " + p("split/test.csv") + " --out " +
              p("grep" + tag + ".json"));
    if (rc != 0) return {false, "CLI failed on run " + tag};
    outputs[rep] = {slurp(model), slurp(p("pred" + tag + ".csv")), slurp(p("dump" + tag + ".jsonl")),
                    slurp(p("rep" + tag + ".json")), slurp(p("grep" + tag + ".json"))};
  }
  // Reports name the model file, so compare with that one path normalized.
  const auto normalize = [](std::string s, const std::string& tag) {
    const std::string from = "model" + tag + ".json";
    for (std::size_t pos; (pos = s.find(from)) != std::string::npos;) s.replace(pos, from.size(), "model.json");
    return s;
  };
  std::size_t same = 0, total = 0;
  for (std::size_t k = 0; k < outputs[0].size(); ++k) {
    for (int rep = 1; rep < 3; ++rep) {
      ++total;
      same += normalize(outputs[0][k], "0") == normalize(outputs[rep][k], std::to_string(rep)) ? 1 : 0;
    }
  }
  std::filesystem::remove_all(dir);
  return {same == total, std::to_string(same) + "/" + std::to_string(total) +
                             " artifacts byte-identical (fit, predict, cdf dump, cpd and gaussian reports; 1 vs 1 vs 4 threads)"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "transducer equivalence", 5, transducer_equivalence},
      {2, "validity (KS uniformity of CDF at true labels)", 60, validity},
      {3, "coverage within 2 points at 0.80/0.90/0.95", 60, coverage},
      {4, "calibration ordering cpd vs fixed-sigma gaussian", 60, calibration_ordering},
      {5, "shuffle study", 90, shuffle_study_outcome},
      {6, "probit accuracy", 5, probit_accuracy},
      {7, "auroc vs pairwise oracle", 10, auroc_oracle},
      {8, "hand examples", 1, hand_examples},
      {9, "determinism across reruns and thread counts", 0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_seconds == 0 || secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.name << " [" << fmt(secs) << " s";
    if (c.limit_seconds > 0) std::cout << " / limit " << fmt(c.limit_seconds) << " s";
    std::cout << "] " << o.detail << (in_time ? "" : " (over time limit)") << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion(s) failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
