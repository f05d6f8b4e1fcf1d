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

// Dataset ingestion, z-normalization, shuffling/splitting, synthetic data,
// and (de)serialization of models, predictions and reports.
//
// File formats
// ------------
//   labeled data     CSV header `id,f1,...,fd,label`   JSONL {"id","f1".."fd","label"}
//   predictions      CSV header `id,y_hat,sigma_hat`   JSONL {"id","y_hat","sigma_hat"}
//   model / report   JSON object with "kind" and "format_version" fields
//
// Headers are mandatory. Reals are written in shortest round-trip form, so
// save/load is bit-exact for every finite double.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cqe/baseline.hpp"
#include "cqe/core_types.hpp"
#include "cqe/format.hpp"
#include "cqe/knn.hpp"
#include "cqe/predictive.hpp"
#include "cqe/rng.hpp"

namespace cqe {

inline constexpr int kFormatVersion = 1;

enum class FileFormat { csv, jsonl };

inline FileFormat parse_file_format(std::string_view name) {
  if (name == "csv") return FileFormat::csv;
  if (name == "jsonl") return FileFormat::jsonl;
  throw ContractError("unknown file format '" + std::string(name) + "' (expected csv or jsonl)");
}

inline std::string to_string(FileFormat f) { return f == FileFormat::csv ? "csv" : "jsonl"; }

/// One parsed data row; the label is absent for unlabeled query files.
struct DataRow {
  std::string id;
  std::vector<double> features;
  std::optional<double> label;
};

enum class LabelColumn { required, optional };

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool blank(std::string_view s) { return trim(s).empty(); }

[[noreturn]] inline void parse_fail(const std::string& source, std::size_t line, const std::string& msg) {
  throw FormatError(source + ":" + std::to_string(line) + ": " + msg);
}

inline double parse_field(std::string_view text, const std::string& source, std::size_t line,
                          std::string_view column) {
  const auto v = parse_real(text);
  if (!v) parse_fail(source, line, "column '" + std::string(column) + "': not a number: '" + std::string(text) + "'");
  return *v;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContractError("cannot open '" + path + "' for writing");
  return out;
}

inline std::vector<DataRow> read_csv_rows(std::istream& in, const std::string& source, LabelColumn mode) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    for (const auto f : split_csv_line(line)) header.emplace_back(trim(f));
    break;
  }
  if (header.empty()) throw ContractError(source + ": empty dataset (no header)");
  if (header.front() != "id") parse_fail(source, lineno, "first header column must be 'id'");
  const bool has_label = header.back() == "label";
  if (mode == LabelColumn::required && !has_label) parse_fail(source, lineno, "last header column must be 'label'");
  const std::size_t dim = header.size() - 1 - (has_label ? 1 : 0);
  if (dim == 0) parse_fail(source, lineno, "no feature columns");
  for (std::size_t j = 0; j < dim; ++j) {
    const std::string want = "f" + std::to_string(j + 1);
    if (header[j + 1] != want) parse_fail(source, lineno, "header column " + std::to_string(j + 2) + " must be '" + want + "', got '" + header[j + 1] + "'");
  }

  std::vector<DataRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      parse_fail(source, lineno, "expected " + std::to_string(header.size()) + " fields, got " +
                                     std::to_string(fields.size()));
    }
    DataRow row;
    row.id = std::string(trim(fields[0]));
    if (row.id.empty()) parse_fail(source, lineno, "empty id");
    row.features.reserve(dim);
    for (std::size_t j = 0; j < dim; ++j) row.features.push_back(parse_field(fields[j + 1], source, lineno, header[j + 1]));
    if (has_label) row.label = parse_field(fields.back(), source, lineno, "label");
    if (!all_finite(row.features) || (row.label && !std::isfinite(*row.label))) {
      parse_fail(source, lineno, "row " + describe_id(row.id) + ": non-finite value");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<DataRow> read_jsonl_rows(std::istream& in, const std::string& source, LabelColumn mode) {
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  std::vector<DataRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      parse_fail(source, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) parse_fail(source, lineno, "expected a JSON object");
    if (!obj.contains("id") || !obj["id"].is_string()) parse_fail(source, lineno, "missing string field 'id'");
    DataRow row;
    row.id = obj["id"].get<std::string>();
    if (row.id.empty()) parse_fail(source, lineno, "empty id");
    std::size_t this_dim = 0;
    while (obj.contains("f" + std::to_string(this_dim + 1))) ++this_dim;
    if (this_dim == 0) parse_fail(source, lineno, "no feature fields f1..fd");
    if (dim == 0) dim = this_dim;
    if (this_dim != dim) {
      parse_fail(source, lineno, "row " + describe_id(row.id) + " has " + std::to_string(this_dim) +
                                     " features, expected " + std::to_string(dim));
    }
    const bool has_label = obj.contains("label");
    if (mode == LabelColumn::required && !has_label) parse_fail(source, lineno, "missing field 'label'");
    if (obj.size() != 1 + dim + (has_label ? 1 : 0)) parse_fail(source, lineno, "unexpected extra fields");
    for (std::size_t j = 0; j < dim; ++j) {
      const auto& v = obj["f" + std::to_string(j + 1)];
      if (!v.is_number()) parse_fail(source, lineno, "field 'f" + std::to_string(j + 1) + "' is not a number");
      row.features.push_back(v.get<double>());
    }
    if (has_label) {
      if (!obj["label"].is_number()) parse_fail(source, lineno, "field 'label' is not a number");
      row.label = obj["label"].get<double>();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

inline std::vector<DataRow> read_rows(std::istream& in, FileFormat format, LabelColumn mode,
                                      const std::string& source = "<stream>") {
  auto rows = format == FileFormat::csv ? detail::read_csv_rows(in, source, mode)
                                        : detail::read_jsonl_rows(in, source, mode);
  if (rows.empty()) throw ContractError(source + ": empty dataset");
  return rows;
}

inline std::vector<DataRow> load_rows(const std::string& path, FileFormat format, LabelColumn mode) {
  auto in = detail::open_input(path);
  return read_rows(in, format, mode, path);
}

inline std::vector<LabeledExample> to_examples(std::vector<DataRow> rows) {
  std::vector<LabeledExample> out;
  out.reserve(rows.size());
  for (auto& r : rows) {
    detail::require(r.label.has_value(), "row " + detail::describe_id(r.id) + ": missing label");
    out.emplace_back(std::move(r.id), std::move(r.features), *r.label);
  }
  uniform_dimension(out);
  return out;
}

inline std::vector<LabeledExample> read_examples(std::istream& in, FileFormat format,
                                                 const std::string& source = "<stream>") {
  return to_examples(read_rows(in, format, LabelColumn::required, source));
}

/// Labeled dataset in file order; every row validated.
inline std::vector<LabeledExample> load_examples(const std::string& path, FileFormat format) {
  return to_examples(load_rows(path, format, LabelColumn::required));
}

inline void write_examples(std::ostream& out, std::span<const LabeledExample> examples, FileFormat format) {
  const std::size_t d = uniform_dimension(examples);
  if (format == FileFormat::csv) {
    out << "id";
    for (std::size_t j = 0; j < d; ++j) out << ",f" << (j + 1);
    out << ",label\n";
    for (const auto& ex : examples) {
      out << ex.id();
      for (const double v : ex.features()) out << ',' << format_real(v);
      out << ',' << format_real(ex.label()) << '\n';
    }
    return;
  }
  for (const auto& ex : examples) {
    nlohmann::ordered_json obj;
    obj["id"] = ex.id();
    for (std::size_t j = 0; j < d; ++j) obj["f" + std::to_string(j + 1)] = ex.features()[j];
    obj["label"] = ex.label();
    out << obj.dump() << '\n';
  }
}

inline void save_examples(const std::string& path, std::span<const LabeledExample> examples, FileFormat format) {
  auto out = detail::open_output(path);
  write_examples(out, examples, format);
}

// -- predictions -------------------------------------------------------------

inline std::vector<PointPrediction> read_predictions(std::istream& in, FileFormat format,
                                                     const std::string& source = "<stream>") {
  std::vector<PointPrediction> out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = format == FileFormat::jsonl;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    if (!header_seen) {
      const auto f = detail::split_csv_line(line);
      if (f.size() != 3 || detail::trim(f[0]) != "id" || detail::trim(f[1]) != "y_hat" ||
          detail::trim(f[2]) != "sigma_hat") {
        detail::parse_fail(source, lineno, "prediction header must be 'id,y_hat,sigma_hat'");
      }
      header_seen = true;
      continue;
    }
    try {
      if (format == FileFormat::csv) {
        const auto f = detail::split_csv_line(line);
        if (f.size() != 3) detail::parse_fail(source, lineno, "expected 3 fields");
        out.emplace_back(std::string(detail::trim(f[0])), detail::parse_field(f[1], source, lineno, "y_hat"),
                         detail::parse_field(f[2], source, lineno, "sigma_hat"));
      } else {
        nlohmann::json obj;
        try {
          obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
          detail::parse_fail(source, lineno, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() || !obj.contains("y_hat") ||
            !obj["y_hat"].is_number() || !obj.contains("sigma_hat") || !obj["sigma_hat"].is_number()) {
          detail::parse_fail(source, lineno, "expected {\"id\": str, \"y_hat\": num, \"sigma_hat\": num}");
        }
        out.emplace_back(obj["id"].get<std::string>(), obj["y_hat"].get<double>(), obj["sigma_hat"].get<double>());
      }
    } catch (const FormatError&) {
      throw;
    } catch (const ContractError& e) {
      detail::parse_fail(source, lineno, e.what());
    }
  }
  if (out.empty()) throw ContractError(source + ": empty prediction set");
  return out;
}

inline std::vector<PointPrediction> load_predictions(const std::string& path, FileFormat format) {
  auto in = detail::open_input(path);
  return read_predictions(in, format, path);
}

inline void write_predictions(std::ostream& out, std::span<const PointPrediction> preds, FileFormat format) {
  if (format == FileFormat::csv) {
    out << "id,y_hat,sigma_hat\n";
    for (const auto& p : preds) out << p.id() << ',' << format_real(p.y_hat()) << ',' << format_real(p.sigma_hat()) << '\n';
    return;
  }
  for (const auto& p : preds) {
    nlohmann::ordered_json obj;
    obj["id"] = p.id();
    obj["y_hat"] = p.y_hat();
    obj["sigma_hat"] = p.sigma_hat();
    out << obj.dump() << '\n';
  }
}

inline void save_predictions(const std::string& path, std::span<const PointPrediction> preds, FileFormat format) {
  auto out = detail::open_output(path);
  write_predictions(out, preds, format);
}

// -- normalization -----------------------------------------------------------

struct ZNormalized {
  std::vector<double> labels;
  double mu;
  double sigma;  // population standard deviation
};

inline ZNormalized znormalize(std::span<const double> raw) {
  detail::require(raw.size() >= 2, "znormalize: need at least 2 scores");
  detail::require(detail::all_finite(raw), "znormalize: non-finite score");
  double mu = 0.0;
  for (const double v : raw) mu += v;
  mu /= static_cast<double>(raw.size());
  double ss = 0.0;
  for (const double v : raw) ss += (v - mu) * (v - mu);
  const double sigma = std::sqrt(ss / static_cast<double>(raw.size()));
  if (!(sigma > 0.0)) throw DegenerateError("znormalize: constant scores");
  ZNormalized out{std::vector<double>(raw.size()), mu, sigma};
  for (std::size_t i = 0; i < raw.size(); ++i) out.labels[i] = (raw[i] - mu) / sigma;
  return out;
}

inline double denormalize(double label, double mu, double sigma) { return mu + sigma * label; }

/// Replaces every label by its z-normalized value over the whole set.
inline std::vector<LabeledExample> znormalize_labels(std::span<const LabeledExample> examples, double* mu_out = nullptr,
                                                     double* sigma_out = nullptr) {
  const auto z = znormalize(labels_of(examples));
  std::vector<LabeledExample> out;
  out.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto f = examples[i].features();
    out.emplace_back(examples[i].id(), std::vector<double>(f.begin(), f.end()), z.labels[i]);
  }
  if (mu_out) *mu_out = z.mu;
  if (sigma_out) *sigma_out = z.sigma;
  return out;
}

// -- splitting ---------------------------------------------------------------

struct SplitSpec {
  std::uint64_t seed = 1;
  double proper_train = 0.7;
  double calibration = 0.15;
  double test = 0.15;

  void validate() const {
    detail::require(proper_train > 0.0 && calibration > 0.0 && test > 0.0, "split: every fraction must be > 0");
    detail::require(std::abs(proper_train + calibration + test - 1.0) <= 1e-9, "split: fractions must sum to 1");
  }
};

struct Split {
  std::vector<LabeledExample> proper_train;
  std::vector<LabeledExample> calibration;
  std::vector<LabeledExample> test;
};

namespace detail {

inline Split cut(std::span<const LabeledExample> ordered, std::size_t first_end, std::size_t second_end) {
  Split s;
  s.proper_train.assign(ordered.begin(), ordered.begin() + static_cast<std::ptrdiff_t>(first_end));
  s.calibration.assign(ordered.begin() + static_cast<std::ptrdiff_t>(first_end),
                       ordered.begin() + static_cast<std::ptrdiff_t>(second_end));
  s.test.assign(ordered.begin() + static_cast<std::ptrdiff_t>(second_end), ordered.end());
  return s;
}

}  // namespace detail

/// Seeded Fisher-Yates permutation, then contiguous cuts at
/// floor(train n) and floor(train n) + floor(calibration n).
inline Split shuffle_split(std::span<const LabeledExample> examples, const SplitSpec& spec) {
  spec.validate();
  const auto n = examples.size();
  const auto n_train = static_cast<std::size_t>(std::floor(detail::snap_integral(spec.proper_train * static_cast<double>(n))));
  const auto n_calib = static_cast<std::size_t>(std::floor(detail::snap_integral(spec.calibration * static_cast<double>(n))));
  if (n_train == 0 || n_calib == 0 || n_train + n_calib >= n) {
    throw ContractError("shuffle_split: " + std::to_string(n) + " examples leave an empty split");
  }
  std::vector<LabeledExample> perm(examples.begin(), examples.end());
  rng::Engine gen(spec.seed);
  rng::fisher_yates(std::span<LabeledExample>(perm), gen);
  return detail::cut(perm, n_train, n_train + n_calib);
}

/// Contiguous slices in file order: [0, first_end), [first_end, second_end), [second_end, n).
inline Split passthrough_split(std::span<const LabeledExample> examples, std::size_t first_end, std::size_t second_end) {
  const auto n = examples.size();
  if (first_end == 0 || second_end <= first_end || second_end >= n) {
    throw ContractError("passthrough_split: boundaries (" + std::to_string(first_end) + "," +
                        std::to_string(second_end) + ") must satisfy 0 < m < n' < " + std::to_string(n));
  }
  return detail::cut(examples, first_end, second_end);
}

// -- synthetic data ----------------------------------------------------------

struct SynthSpec {
  enum class Noise { homoscedastic, heteroscedastic };

  std::size_t n = 1000;
  std::size_t feature_dim = 2;
  Noise noise = Noise::heteroscedastic;
  double sigma = 0.1;   // homoscedastic std (0 = noiseless)
  double sigma0 = 0.1;  // heteroscedastic base std
  double slope = 4.0;   // heteroscedastic std = sigma0 (1 + slope |x1|)
  /// Fraction of trailing examples drawn from the shifted regime.
  double shift = 0.0;
  std::uint64_t seed = 1;

  void validate() const {
    detail::require(n >= 1, "synth: n must be >= 1");
    detail::require(feature_dim >= 1, "synth: feature_dim must be >= 1");
    if (noise == Noise::homoscedastic) {
      detail::require(std::isfinite(sigma) && sigma >= 0.0, "synth: sigma must be >= 0");
    } else {
      detail::require(std::isfinite(sigma0) && sigma0 > 0.0, "synth: sigma0 must be > 0");
      detail::require(std::isfinite(slope) && slope >= 0.0, "synth: slope must be >= 0");
    }
    detail::require(shift >= 0.0 && shift < 1.0, "synth: shift must lie in [0,1)");
  }
};

/// Noise-free response sin(pi x1) + x2 (x2 term only when d >= 2).
inline double synth_mean(std::span<const double> x) {
  return std::sin(std::numbers::pi * x[0]) + (x.size() >= 2 ? x[1] : 0.0);
}

inline double synth_noise_std(const SynthSpec& spec, std::span<const double> x) {
  return spec.noise == SynthSpec::Noise::homoscedastic ? spec.sigma : spec.sigma0 * (1.0 + spec.slope * std::abs(x[0]));
}

/// x ~ U[-1,1]^d, y = synth_mean(x) + noise. The last ceil(shift n) rows
/// draw x1 from [0.5, 1] and add +1 to the label.
inline std::vector<LabeledExample> synth_generate(const SynthSpec& spec) {
  spec.validate();
  rng::Engine gen(spec.seed);
  const auto n_shifted = static_cast<std::size_t>(std::ceil(detail::snap_integral(spec.shift * static_cast<double>(spec.n))));
  const std::size_t width = std::to_string(spec.n - 1).size();
  std::vector<LabeledExample> out;
  out.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const bool shifted = i >= spec.n - n_shifted;
    std::vector<double> x(spec.feature_dim);
    for (auto& v : x) v = rng::uniform(gen, -1.0, 1.0);
    if (shifted) x[0] = rng::uniform(gen, 0.5, 1.0);
    const double z = rng::standard_normal(gen);
    const double y = synth_mean(x) + (shifted ? 1.0 : 0.0) + synth_noise_std(spec, x) * z;
    std::string id = std::to_string(i);
    id.insert(0, width - id.size(), '0');
    out.emplace_back("s" + id, std::move(x), y);
  }
  return out;
}

// -- JSON artifacts ----------------------------------------------------------

namespace detail {

using ojson = nlohmann::ordered_json;

inline void check_header(const nlohmann::json& j, std::string_view kind) {
  if (!j.is_object()) throw FormatError("corrupt payload: expected a JSON object");
  if (!j.contains("format_version") || !j["format_version"].is_number_integer()) {
    throw FormatError("corrupt payload: missing format_version");
  }
  const int version = j["format_version"].get<int>();
  if (version != kFormatVersion) {
    throw VersionError("unsupported format_version " + std::to_string(version) + " (this build reads " +
                       std::to_string(kFormatVersion) + ")");
  }
  if (!j.contains("kind") || j["kind"] != kind) {
    throw FormatError("corrupt payload: expected kind '" + std::string(kind) + "'");
  }
}

inline nlohmann::json parse_payload(std::istream& in) {
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("corrupt payload: ") + e.what());
  }
}

template <typename F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt payload: ") + e.what());
  }
}

inline ojson provenance_json(const Provenance& p) {
  ojson j = ojson::object();
  for (const auto& [k, v] : p) j[k] = v;
  return j;
}

inline Provenance provenance_from(const nlohmann::json& j) {
  Provenance p;
  for (const auto& [k, v] : j.items()) p[k] = v.get<std::string>();
  return p;
}

}  // namespace detail

inline detail::ojson to_json(const ConformalModel& m) {
  detail::ojson j;
  j["n_calib"] = m.n_calib();
  j["feature_dim"] = m.feature_dim();
  j["residuals"] = std::vector<double>(m.residuals().begin(), m.residuals().end());
  j["provenance"] = detail::provenance_json(m.provenance());
  return j;
}

inline ConformalModel conformal_model_from_json(const nlohmann::json& j) {
  return detail::guarded([&] {
    auto residuals = j.at("residuals").get<std::vector<double>>();
    const auto n_calib = j.at("n_calib").get<std::size_t>();
    if (n_calib != residuals.size()) throw FormatError("corrupt payload: n_calib does not match residual count");
    return ConformalModel(std::move(residuals), j.at("feature_dim").get<std::size_t>(),
                          detail::provenance_from(j.at("provenance")));
  });
}

inline detail::ojson to_json(const FittedKnn& knn) {
  detail::ojson j;
  j["k_regress"] = knn.config().k_regress;
  j["k_difficulty"] = knn.config().k_difficulty;
  j["beta"] = knn.config().beta;
  j["distance"] = "euclidean";
  detail::ojson train = detail::ojson::array();
  for (const auto& ex : knn.train()) {
    detail::ojson row;
    row["id"] = ex.id();
    row["x"] = std::vector<double>(ex.features().begin(), ex.features().end());
    row["y"] = ex.label();
    train.push_back(std::move(row));
  }
  j["train"] = std::move(train);
  return j;
}

inline FittedKnn fitted_knn_from_json(const nlohmann::json& j) {
  return detail::guarded([&] {
    if (j.at("distance") != "euclidean") throw FormatError("corrupt payload: unknown distance");
    KnnConfig cfg;
    cfg.k_regress = j.at("k_regress").get<std::size_t>();
    cfg.k_difficulty = j.at("k_difficulty").get<std::size_t>();
    cfg.beta = j.at("beta").get<double>();
    std::vector<LabeledExample> train;
    for (const auto& row : j.at("train")) {
      train.emplace_back(row.at("id").get<std::string>(), row.at("x").get<std::vector<double>>(),
                         row.at("y").get<double>());
    }
    return FittedKnn(std::move(train), cfg);
  });
}

/// Everything `fit` produces: the conformal calibration, the optional KNN
/// underlying model and the optional Gaussian baseline.
struct ModelBundle {
  ConformalModel conformal;
  std::optional<FittedKnn> knn;
  std::optional<GaussianBaseline> baseline;
};

inline void write_model(std::ostream& out, const ModelBundle& bundle) {
  detail::ojson j;
  j["kind"] = "cqe.model";
  j["format_version"] = kFormatVersion;
  j["conformal"] = to_json(bundle.conformal);
  j["knn"] = bundle.knn ? to_json(*bundle.knn) : detail::ojson(nullptr);
  if (bundle.baseline) {
    j["baseline"] = detail::ojson{{"sigma_fixed", bundle.baseline->sigma_fixed()}};
  } else {
    j["baseline"] = nullptr;
  }
  out << j.dump(1) << '\n';
}

inline ModelBundle read_model(std::istream& in) {
  const auto j = detail::parse_payload(in);
  detail::check_header(j, "cqe.model");
  return detail::guarded([&] {
    ModelBundle b{conformal_model_from_json(j.at("conformal")), std::nullopt, std::nullopt};
    if (!j.at("knn").is_null()) b.knn = fitted_knn_from_json(j.at("knn"));
    if (!j.at("baseline").is_null()) b.baseline = GaussianBaseline(j.at("baseline").at("sigma_fixed").get<double>());
    return b;
  });
}

inline void save_model(const std::string& path, const ModelBundle& bundle) {
  auto out = detail::open_output(path);
  write_model(out, bundle);
}

inline ModelBundle load_model(const std::string& path) {
  auto in = detail::open_input(path);
  return read_model(in);
}

inline void write_report(std::ostream& out, const EvalReport& r) {
  detail::ojson j;
  j["kind"] = "cqe.report";
  j["format_version"] = kFormatVersion;
  j["method"] = r.method_name();
  j["n_test"] = r.n_test();
  j["ece"] = r.ece();
  j["ece_percent"] = 100.0 * r.ece();
  detail::ojson sharp = detail::ojson::array();
  for (const auto& [level, excluded] : r.sharpness_excluded()) {
    detail::ojson row;
    row["confidence"] = level;
    const auto it = r.sharpness_at().find(level);
    row["mean_width"] = it == r.sharpness_at().end() ? detail::ojson(nullptr) : detail::ojson(it->second);
    row["excluded_unbounded"] = excluded;
    sharp.push_back(std::move(row));
  }
  j["sharpness"] = std::move(sharp);
  j["auroc"] = r.auroc();
  j["decile_threshold"] = r.decile_threshold();
  j["provenance"] = detail::provenance_json(r.provenance());
  out << j.dump(1) << '\n';
}

inline EvalReport read_report(std::istream& in) {
  const auto j = detail::parse_payload(in);
  detail::check_header(j, "cqe.report");
  return detail::guarded([&] {
    EvalReportFields f;
    f.method_name = j.at("method").get<std::string>();
    f.n_test = j.at("n_test").get<std::size_t>();
    f.ece = j.at("ece").get<double>();
    for (const auto& row : j.at("sharpness")) {
      const double level = row.at("confidence").get<double>();
      f.sharpness_excluded[level] = row.at("excluded_unbounded").get<std::size_t>();
      if (!row.at("mean_width").is_null()) f.sharpness_at[level] = row.at("mean_width").get<double>();
    }
    f.auroc = j.at("auroc").get<double>();
    f.decile_threshold = j.at("decile_threshold").get<double>();
    f.provenance = detail::provenance_from(j.at("provenance"));
    return EvalReport(std::move(f));
  });
}

inline void save_report(const std::string& path, const EvalReport& r) {
  auto out = detail::open_output(path);
  write_report(out, r);
}

inline EvalReport load_report(const std::string& path) {
  auto in = detail::open_input(path);
  return read_report(in);
}

/// FNV-1a 64 of a file's bytes, hex; recorded in provenance blocks.
inline std::string file_digest(const std::string& path) {
  auto in = detail::open_input(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << "fnv1a64:" << std::hex << h;
  return os.str();
}

}  // namespace cqe
