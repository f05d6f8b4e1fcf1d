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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "cqe/core_types.hpp"

namespace cqe {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

TEST(LabeledExample, RejectsNonFiniteValues) {
  EXPECT_THROW(LabeledExample("a", {1.0, kNaN}, 0.0), ContractError);
  EXPECT_THROW(LabeledExample("a", {1.0}, kInf), ContractError);
  EXPECT_THROW(LabeledExample("a", {}, 0.0), ContractError);
  const LabeledExample ok("a", {1.0, 2.0}, 0.5);
  EXPECT_EQ(ok.dim(), 2u);
  EXPECT_EQ(ok.label(), 0.5);
}

TEST(LabeledExample, UniformDimensionReportsOffender) {
  std::vector<LabeledExample> mixed = {LabeledExample("a", {1, 2}, 0), LabeledExample("b", {1, 2, 3}, 0)};
  try {
    uniform_dimension(mixed);
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
  }
  EXPECT_THROW(uniform_dimension(std::span<const LabeledExample>{}), ContractError);
}

TEST(PointPrediction, SigmaMustBePositive) {
  EXPECT_THROW(PointPrediction("p", 0.0, 0.0), ContractError);
  EXPECT_THROW(PointPrediction("p", 0.0, -1.0), ContractError);
  EXPECT_THROW(PointPrediction("p", kNaN, 1.0), ContractError);
  EXPECT_NO_THROW(PointPrediction("p", 0.0, 1e-300));
}

TEST(ConformalModel, RequiresSortedNonEmptyResiduals) {
  EXPECT_THROW(ConformalModel({}, 1), ContractError);
  EXPECT_THROW(ConformalModel({0.5, -0.4}, 1), ContractError);
  EXPECT_THROW(ConformalModel({0.0}, 0), ContractError);
  const ConformalModel m({-0.4, 0.5, 0.5}, 2, {{"seed", "1"}});
  EXPECT_EQ(m.n_calib(), 3u);
  EXPECT_EQ(m.provenance().at("seed"), "1");
}

TEST(PredictiveDistribution, ValidatesTauAndOrder) {
  EXPECT_THROW(PredictiveDistribution({0.6, 1.5}, 1.5), ContractError);
  EXPECT_THROW(PredictiveDistribution({0.6, 1.5}, -0.1), ContractError);
  EXPECT_THROW(PredictiveDistribution({1.5, 0.6}, 0.5), ContractError);
  EXPECT_NO_THROW(PredictiveDistribution({0.6, 1.5, 1.5}, 1.0));
}

TEST(PredictionInterval, ClosedAndPossiblyUnbounded) {
  EXPECT_THROW(PredictionInterval(1.0, 0.0, 0.9), ContractError);
  EXPECT_THROW(PredictionInterval(0.0, 1.0, 1.0), ContractError);
  const PredictionInterval iv(0.0, 1.0, 0.9);
  EXPECT_TRUE(iv.contains(0.0));
  EXPECT_TRUE(iv.contains(1.0));
  EXPECT_FALSE(iv.contains(1.0000001));
  const PredictionInterval open(-kInf, kInf, 0.95);
  EXPECT_FALSE(open.bounded());
  EXPECT_TRUE(open.contains(1e300));
}

TEST(EvalReport, RangeChecks) {
  EvalReportFields f;
  f.method_name = "cpd";
  f.n_test = 10;
  f.ece = 0.02;
  f.auroc = 0.8;
  EXPECT_NO_THROW(EvalReport{f});
  auto bad = f;
  bad.ece = 1.5;
  EXPECT_THROW(EvalReport{bad}, ContractError);
  bad = f;
  bad.auroc = -0.1;
  EXPECT_THROW(EvalReport{bad}, ContractError);
  bad = f;
  bad.n_test = 0;
  EXPECT_THROW(EvalReport{bad}, ContractError);
  bad = f;
  bad.sharpness_at[0.9] = -1.0;
  EXPECT_THROW(EvalReport{bad}, ContractError);
}

}  // namespace
}  // namespace cqe
