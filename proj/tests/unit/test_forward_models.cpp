// Copyright 2026 The abimc Authors.
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

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <random>

#include "abimc/error.hpp"
#include "abimc/forward_models.hpp"
#include "test_support.hpp"

namespace abimc {
namespace {

using testing::AffineMap;
using testing::fd_gradient;
using testing::fd_hessian;
using testing::random_vector;

void expect_consistent_derivatives(const ForwardMap& map, const Vector& x, double tol) {
  auto f = [&](const Vector& y) { return map.value(y); };
  auto g = [&](const Vector& y) { return map.gradient(y); };
  const Vector g_fd = fd_gradient(f, x);
  const Matrix h_fd = fd_hessian(g, x);
  const Vector g_an = map.gradient(x);
  const Matrix h_an = map.hessian(x);
  EXPECT_LT((g_an - g_fd).norm(), tol * std::max(1.0, g_an.norm()));
  EXPECT_LT((h_an - h_fd).norm(), tol * std::max(1.0, h_an.norm()));
}

TEST(ToyMap, Values) {
  const ToyMap f;
  EXPECT_EQ(f.value(Vector::Zero(2)), 0.0);
  Vector x(2);
  x << std::numbers::pi / 2.0, 0.0;
  EXPECT_NEAR(f.gradient(x).norm(), 0.0, 1e-16);
  x << 0.3, 0.7;
  EXPECT_EQ(f.value(x), std::sin(0.3) * std::cos(0.7));
}

TEST(ToyMap, DerivativesMatchFiniteDifferences) {
  const ToyMap f;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) expect_consistent_derivatives(f, 2.0 * random_vector(2, rng), 1e-6);
}

TEST(ToyMap, RejectsWrongDimension) {
  const ToyMap f;
  EXPECT_THROW(f.value(Vector::Zero(3)), DimensionError);
}

TEST(PolynomialMap, QuadraticAndCubicDerivatives) {
  for (MapOrder order : {MapOrder::quadratic, MapOrder::cubic}) {
    const PolynomialMap f(generate_polynomial(order, 6, 4, RandomStream(3)));
    std::mt19937_64 rng(2);
    for (int i = 0; i < 10; ++i) expect_consistent_derivatives(f, random_vector(6, rng), 1e-6);
  }
}

TEST(PolynomialMap, CubicMatchesExplicitContraction) {
  const PolynomialMapSpec spec = generate_polynomial(MapOrder::cubic, 5, 3, RandomStream(4));
  const PolynomialMap f(spec);
  std::mt19937_64 rng(5);
  const Vector x = random_vector(5, rng);
  double expected = x.dot(spec.H * x) + spec.b.dot(x) + spec.c;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      for (int k = 0; k < 5; ++k) expected += spec.S[(i * 5 + j) * 5 + k] * x[i] * x[j] * x[k];
  EXPECT_NEAR(f.value(x), expected, 1e-11 * std::abs(expected));
}

TEST(PolynomialMap, InsensitiveBeyondIntrinsicDimension) {
  for (MapOrder order : {MapOrder::quadratic, MapOrder::cubic}) {
    const PolynomialMap f(generate_polynomial(order, 16, 4, RandomStream(6)));
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      const Vector x = random_vector(16, rng);
      const Vector g = fd_gradient([&](const Vector& y) { return f.value(y); }, x);
      EXPECT_LT(g.tail(12).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_EQ(f.gradient(x).tail(12).cwiseAbs().maxCoeff(), 0.0);
    }
  }
}

TEST(PolynomialMap, QuadraticHessianIsConstant) {
  const PolynomialMap f(generate_polynomial(MapOrder::quadratic, 8, 8, RandomStream(8)));
  std::mt19937_64 rng(9);
  EXPECT_LT((f.hessian(random_vector(8, rng)) - f.hessian(random_vector(8, rng))).norm(), 1e-12);
}

TEST(GeneratePolynomial, Structure) {
  const PolynomialMapSpec spec = generate_polynomial(MapOrder::cubic, 6, 4, RandomStream(10));
  EXPECT_NO_THROW(spec.validate());
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(spec.H);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
  EXPECT_EQ(spec.H, spec.H.transpose());
  for (int i = 0; i < 4; ++i) {
    EXPECT_GE(spec.b[i], 0.0);
    EXPECT_LT(spec.b[i], 1.0);
  }
  auto s = [&](int i, int j, int k) { return spec.S[(i * 6 + j) * 6 + k]; };
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) {
        EXPECT_NEAR(s(i, j, k), s(j, i, k), 1e-14);
        EXPECT_NEAR(s(i, j, k), s(k, j, i), 1e-14);
      }
}

TEST(GeneratePolynomial, WishartMean) {
  // E[W(2I, n+1)] = 2 (n+1) I
  const int n = 3;
  Matrix mean = Matrix::Zero(n, n);
  const int reps = 4000;
  for (int r = 0; r < reps; ++r) {
    mean += generate_polynomial(MapOrder::quadratic, n, n, RandomStream(r)).H / reps;
  }
  EXPECT_LT((mean - 2.0 * (n + 1) * Matrix::Identity(n, n)).cwiseAbs().maxCoeff(), 0.4);
}

TEST(GeneratePolynomial, DeterministicAndValidated) {
  const auto a = generate_polynomial(MapOrder::cubic, 5, 2, RandomStream(11));
  const auto b = generate_polynomial(MapOrder::cubic, 5, 2, RandomStream(11));
  EXPECT_EQ(a.H, b.H);
  EXPECT_EQ(a.S, b.S);
  EXPECT_THROW(generate_polynomial(MapOrder::quadratic, 4, 5, RandomStream(1)), DimensionError);
  EXPECT_THROW(generate_polynomial(MapOrder::quadratic, 4, 0, RandomStream(1)), DimensionError);
}

TEST(PolynomialMapSpec, ValidationRejectsBadData) {
  PolynomialMapSpec spec = generate_polynomial(MapOrder::quadratic, 4, 2, RandomStream(12));
  PolynomialMapSpec bad = spec;
  bad.H(0, 1) += 1.0;
  EXPECT_THROW(bad.validate(), FormatError);
  bad = spec;
  bad.b[3] = 1.0;
  EXPECT_THROW(bad.validate(), FormatError);
  bad = spec;
  bad.m_int = 5;
  EXPECT_THROW(bad.validate(), DimensionError);
  bad = spec;
  bad.b = Vector::Zero(3);
  EXPECT_THROW(bad.validate(), DimensionError);
  EXPECT_THROW(PolynomialMap{bad}, DimensionError);
}

TEST(ForwardProblem, CountsEachQueryOnce) {
  ForwardProblem problem = toy_problem();
  const Vector x = Vector::Ones(2);
  problem.value(x);
  problem.value(x);
  problem.gradient(x);
  problem.hessian(x);
  Matrix xs = Matrix::Ones(2, 5);
  problem.values(xs);
  const OracleCounts c = problem.counts();
  EXPECT_EQ(c.value, 7u);
  EXPECT_EQ(c.gradient, 1u);
  EXPECT_EQ(c.hessian, 1u);
  problem.map().value(x);
  EXPECT_EQ(problem.counts(), c);
}

TEST(ToyProblem, Definition) {
  const ForwardProblem problem = toy_problem();
  Vector mean(2);
  mean << 0.0, 1.0;
  EXPECT_EQ(problem.nominal().mean(), mean);
  EXPECT_EQ(problem.nominal().covariance(), 0.3 * Matrix::Identity(2, 2));
  EXPECT_EQ(polynomial_nominal(3).mean(), Vector::Ones(3));
}

TEST(Calibration, AffineMapMatchesNormalCdf) {
  Vector v(3);
  v << 1.0, -2.0, 0.5;
  const AffineMap map(v, 0.25);
  const Gaussian nominal(Vector::Zero(3), Matrix::Identity(3, 3));
  const std::uint64_t n = 400'000;
  const Calibration cal = calibrate_interval(map, nominal, 1e-2, 5, n);
  const double s = v.norm();
  const double exact = normal_cdf((cal.interval.hi - 0.25) / s) - normal_cdf((cal.interval.lo - 0.25) / s);
  EXPECT_NEAR(cal.pilot_estimate, exact, 4.0 * std::sqrt(exact / static_cast<double>(n)));
  EXPECT_GE(cal.pilot_estimate, 5e-3);
  EXPECT_LE(cal.pilot_estimate, 2e-2);
}

TEST(Calibration, ToyTargetWithinFactorTwo) {
  const ToyMap map;
  const Calibration cal = calibrate_interval(map, toy_nominal(), 1e-2, 3, 200'000);
  EXPECT_GE(cal.pilot_estimate, 5e-3);
  EXPECT_LE(cal.pilot_estimate, 2e-2);
  EXPECT_LT(cal.interval.lo, cal.interval.hi);
}

TEST(Calibration, TooFewHitsIsAnError) {
  const ToyMap map;
  EXPECT_THROW(calibrate_interval(map, toy_nominal(), 1e-6, 1, 100'000), CalibrationError);
  EXPECT_THROW(calibrate_interval(map, toy_nominal(), 0.6, 1, 1000), CalibrationError);
}

TEST(PilotProbability, ShippedToyInterval) {
  const ToyMap map;
  const double p = pilot_probability(map, toy_nominal(), kToyInterval, 1'000'000, RandomStream(1));
  EXPECT_GE(p, 3.413e-2 - 4.68e-4);
  EXPECT_LE(p, 3.413e-2 + 4.68e-4);
}

}  // namespace
}  // namespace abimc
