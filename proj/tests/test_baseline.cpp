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

#include <random>

#include "cqe/baseline.hpp"
#include "support/oracles.hpp"

namespace cqe {
namespace {

TEST(FitSigmaFixed, MeanSquaredResidual) {
  EXPECT_DOUBLE_EQ(fit_sigma_fixed(std::vector<double>{1, -1, 1, -1}, std::vector<double>{0, 0, 0, 0}).sigma_fixed(),
                   1.0);
  EXPECT_NEAR(fit_sigma_fixed(std::vector<double>{3, 1}, std::vector<double>{1, 1}).sigma_fixed(), std::sqrt(2.0),
              1e-12);
  EXPECT_THROW(fit_sigma_fixed(std::vector<double>{2, 2}, std::vector<double>{2, 2}), DegenerateError);
  EXPECT_THROW(fit_sigma_fixed(std::vector<double>{}, std::vector<double>{}), ContractError);
  EXPECT_THROW(fit_sigma_fixed(std::vector<double>{1}, std::vector<double>{1, 2}), ContractError);
  EXPECT_THROW(GaussianBaseline(0.0), ContractError);
}

TEST(Probit, KnownValues) {
  EXPECT_NEAR(probit(0.5), 0.0, 1e-15);
  EXPECT_NEAR(probit(0.975), 1.959964, 1e-6);
  EXPECT_NEAR(probit(0.95), 1.644854, 1e-6);
  EXPECT_NEAR(probit(0.975), oracle::bisection_probit(0.975), 1e-9);
  EXPECT_NEAR(probit(0.95), oracle::bisection_probit(0.95), 1e-9);
  EXPECT_THROW(probit(0.0), ContractError);
  EXPECT_THROW(probit(1.0), ContractError);
}

TEST(Probit, AntisymmetricAndMatchesBisection) {
  for (int i = 1; i < 2000; ++i) {
    const double p = i / 2000.0;
    EXPECT_NEAR(probit(p), -probit(1.0 - p), 1e-9);
    EXPECT_NEAR(probit(p), oracle::bisection_probit(p), 1e-9);
  }
  for (const double p : {1e-10, 1e-8, 1e-6, 1 - 1e-6}) EXPECT_NEAR(probit(p), oracle::bisection_probit(p), 1e-8);
}

TEST(GaussianInterval, HandExamples) {
  const GaussianBaseline unit(1.0);
  auto iv = gaussian_interval(0.0, unit, 0.9);
  EXPECT_NEAR(iv.lower(), -1.644854, 1e-6);
  EXPECT_NEAR(iv.upper(), 1.644854, 1e-6);

  iv = gaussian_interval(5.0, GaussianBaseline(2.0), 0.9);
  EXPECT_NEAR(iv.lower(), 5.0 - 3.289708, 1e-6);
  EXPECT_NEAR(iv.upper(), 5.0 + 3.289708, 1e-6);

  iv = gaussian_interval(1.25, unit, 0.0);
  EXPECT_EQ(iv.lower(), 1.25);
  EXPECT_EQ(iv.upper(), 1.25);
  EXPECT_THROW(gaussian_interval(0.0, unit, 1.0), ContractError);
}

TEST(GaussianInterval, SymmetricEqualWidthAndMonotone) {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> z;
  const GaussianBaseline b(0.7);
  for (int k = 1; k < 50; ++k) {
    const double conf = k / 50.0;
    const double w0 = gaussian_interval(0.0, b, conf).width();
    for (int i = 0; i < 20; ++i) {
      const double mu = z(gen) * 3.0;
      const auto iv = gaussian_interval(mu, b, conf);
      EXPECT_NEAR(mu - iv.lower(), iv.upper() - mu, 1e-12);
      EXPECT_NEAR(iv.width(), w0, 1e-12);
    }
    EXPECT_LT(gaussian_interval(0.0, b, (k - 1) / 50.0).width(), w0);
  }
}

TEST(GaussianCdf, HandExamplesAndRoundTrip) {
  const GaussianBaseline unit(1.0);
  EXPECT_EQ(gaussian_cdf(3.0, unit, 3.0), 0.5);
  EXPECT_NEAR(gaussian_cdf(0.0, unit, 1.959964), 0.975, 1e-6);
  EXPECT_LT(gaussian_cdf(0.0, unit, -10.0), 1e-20);
  EXPECT_GT(gaussian_cdf(0.0, unit, -10.0), 0.0);
  for (double x = -5.0; x <= 5.0; x += 0.01) EXPECT_NEAR(probit(gaussian_cdf(0.0, unit, x)), x, 1e-6);
  EXPECT_NEAR(normal_cdf(0.7), oracle::std_normal_cdf(0.7), 1e-15);
}

}  // namespace
}  // namespace cqe
