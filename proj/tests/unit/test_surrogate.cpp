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

#include <cmath>
#include <limits>
#include <random>

#include "abimc/stage1.hpp"
#include "abimc/surrogate.hpp"
#include "test_support.hpp"

namespace abimc {
namespace {

using testing::random_vector;

FixedChargeSet charges_at(const ForwardMap& map, const Matrix& points) {
  FixedChargeSet set;
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    const Vector x = points.col(j);
    set.add(ChargeRecord{x, map.value(x), map.gradient(x), map.hessian(x)});
  }
  return set;
}

TEST(TaylorSurrogate, ExactOnQuadraticMaps) {
  const PolynomialMap f(generate_polynomial(MapOrder::quadratic, 16, 4, RandomStream(1)));
  std::mt19937_64 rng(2);
  Matrix pts(16, 5);
  for (int j = 0; j < 5; ++j) pts.col(j) = random_vector(16, rng);
  const TaylorSurrogate s(charges_at(f, pts));
  for (int i = 0; i < 100; ++i) {
    const Vector x = 3.0 * random_vector(16, rng);
    EXPECT_NEAR(s.evaluate(x), f.value(x), 1e-12 * std::max(1.0, std::abs(f.value(x))));
  }
}

TEST(TaylorSurrogate, ReproducesChargeValuesExactly) {
  const ToyMap f;
  std::mt19937_64 rng(3);
  Matrix pts(2, 6);
  for (int j = 0; j < 6; ++j) pts.col(j) = random_vector(2, rng);
  const TaylorSurrogate s(charges_at(f, pts));
  for (int j = 0; j < 6; ++j) EXPECT_EQ(s.evaluate(pts.col(j)), f.value(pts.col(j)));
}

TEST(TaylorSurrogate, ThirdOrderAccuracyNearCharge) {
  // All third derivatives of sin(x1) cos(x2) are bounded by 1.
  const ToyMap f;
  std::mt19937_64 rng(4);
  Matrix pts(2, 3);
  for (int j = 0; j < 3; ++j) pts.col(j) = 4.0 * random_vector(2, rng);
  const TaylorSurrogate s(charges_at(f, pts));
  for (int i = 0; i < 50; ++i) {
    const Vector dir = random_vector(2, rng).normalized();
    const Vector x = pts.col(i % 3) + 1e-3 * dir;
    EXPECT_LE(std::abs(s.evaluate(x) - f.value(x)), 1e-9);
  }
}

TEST(TaylorSurrogate, NearestIsLinearScanMinimizer) {
  std::mt19937_64 rng(5);
  Matrix pts(3, 40);
  for (int j = 0; j < 40; ++j) pts.col(j) = random_vector(3, rng);
  const PolynomialMap f(generate_polynomial(MapOrder::cubic, 3, 3, RandomStream(6)));
  const TaylorSurrogate s(charges_at(f, pts));
  for (int i = 0; i < 200; ++i) {
    const Vector x = 2.0 * random_vector(3, rng);
    Eigen::Index best = 0;
    (pts.colwise() - x).colwise().squaredNorm().minCoeff(&best);
    EXPECT_EQ(s.nearest(x), static_cast<std::size_t>(best));
  }
}

TEST(TaylorSurrogate, TiesGoToLowestIndex) {
  const ToyMap f;
  Matrix pts(2, 2);
  pts << -1.0, 1.0, 0.0, 0.0;
  const TaylorSurrogate s(charges_at(f, pts));
  EXPECT_EQ(s.nearest(Vector::Zero(2)), 0u);
  Matrix swapped(2, 2);
  swapped << 1.0, -1.0, 0.0, 0.0;
  const TaylorSurrogate t(charges_at(f, swapped));
  EXPECT_EQ(t.nearest(Vector::Zero(2)), 0u);
  // Off the tie set the insertion order does not matter.
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const Vector x = random_vector(2, rng);
    EXPECT_EQ(s.evaluate(x), t.evaluate(x));
  }
}

TEST(TaylorSurrogate, BatchMatchesPointwise) {
  const ToyMap f;
  std::mt19937_64 rng(8);
  Matrix pts(2, 4);
  for (int j = 0; j < 4; ++j) pts.col(j) = random_vector(2, rng);
  const TaylorSurrogate s(charges_at(f, pts));
  Matrix xs(2, 30);
  for (int j = 0; j < 30; ++j) xs.col(j) = random_vector(2, rng);
  const Vector batch = s.evaluate_batch(xs);
  for (int j = 0; j < 30; ++j) EXPECT_EQ(batch[j], s.evaluate(xs.col(j)));
}

TEST(TaylorSurrogate, NeverQueriesOracle) {
  const ForwardProblem problem = toy_problem();
  const Stage1Output run = run_stage1(problem, Stage1Config{}, RandomStream(2));
  const OracleCounts before = problem.counts();
  const TaylorSurrogate s(run.charges);
  const Matrix xs = sample(run.mixture, 1000, RandomStream(1));
  s.evaluate_batch(xs);
  EXPECT_EQ(problem.counts(), before);
}

TEST(SurrogateTarget, IndicatorTimesNominal) {
  const ForwardProblem problem = toy_problem();
  const Stage1Output run = run_stage1(problem, Stage1Config{}, RandomStream(2));
  const TaylorSurrogate s(run.charges);
  const LogDensity target = surrogate_target_log_density(s, problem.nominal(), problem.interval());

  // Centers map into the interval and the surrogate is exact there.
  Matrix centers(2, static_cast<Eigen::Index>(run.mixture.size()));
  for (std::size_t k = 0; k < run.mixture.size(); ++k) centers.col(static_cast<Eigen::Index>(k)) = run.mixture.component(k).mean();
  const Vector at_centers = target(centers);
  for (Eigen::Index k = 0; k < centers.cols(); ++k) {
    EXPECT_NEAR(at_centers[k], problem.nominal().log_pdf(centers.col(k)), 1e-13);
  }

  const Matrix draws = sample(run.mixture, 100'000, RandomStream(3));
  const Vector lt = target(draws);
  const Vector sv = s.evaluate_batch(draws);
  std::size_t finite = 0;
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    if (kToyInterval.contains(sv[j])) {
      ++finite;
      EXPECT_NEAR(lt[j], problem.nominal().log_pdf(draws.col(j)), 1e-13);
    } else {
      EXPECT_EQ(lt[j], -std::numeric_limits<double>::infinity());
    }
  }
  EXPECT_GT(static_cast<double>(finite) / 1e5, 0.2);
}

}  // namespace
}  // namespace abimc
