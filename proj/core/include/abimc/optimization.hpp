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

#ifndef ABIMC_OPTIMIZATION_HPP
#define ABIMC_OPTIMIZATION_HPP

#include <functional>
#include <vector>

#include "abimc/distributions.hpp"
#include "abimc/forward_models.hpp"

namespace abimc {

/// Smooth scalar function with gradient and optional Hessian. Without a
/// Hessian callback, central differences of the gradient are used.
struct Objective {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
};

/// Hessian by central differences of obj.gradient, symmetrized.
Matrix finite_difference_hessian(const Objective& obj, const Vector& x, double step = 1e-5);

struct TrustRegionSettings {
  double grad_reduction_factor = 1e-2;
  int max_iters = 5;
  double initial_radius = 1.0;
  double max_radius = 100.0;
  double accept_ratio = 1e-4;
  double shrink_ratio = 0.25;
  double expand_ratio = 0.75;
  double min_radius = 1e-12;
  /// Optional early exit, called with each accepted iterate and its value.
  std::function<bool(const Vector&, double)> stop_when;
};

enum class TrustRegionStatus { gradient_reduced, max_iterations, radius_collapsed, stopped };

struct TrustRegionResult {
  Vector x;
  double value = 0.0;
  Vector gradient;
  TrustRegionStatus status = TrustRegionStatus::max_iterations;
  int iterations = 0;
};

/// Newton trust-region minimizer; each iteration solves the quadratic model
/// with Steihaug conjugate gradients. Throws ObjectiveBlewUp when value or
/// gradient is non-finite at x0 or at an accepted point.
TrustRegionResult trust_region_minimize(const Objective& obj, const Vector& x0,
                                        const TrustRegionSettings& settings = {});

/// Approximate minimizer of g^T p + p^T H p / 2 subject to |p| <= radius.
Vector steihaug_cg(const Vector& g, const Matrix& h, double radius, double tolerance, int max_iters);

/// Oracle triple interface for the constraint function.
struct ScalarMap {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
};

/// Counted oracle of a forward problem.
ScalarMap as_scalar_map(const ForwardProblem& problem);

/// Wraps each callback with a one-entry cache keyed on the exact query point,
/// so repeated queries at the same iterate reach the oracle once.
ScalarMap memoize(const ScalarMap& f);

struct AugmentedLagrangianSettings {
  double lambda0 = 0.0;
  double delta0 = 1.0;
  int max_outer = 30;
  TrustRegionSettings inner;
};

struct ALRecord {
  int outer = 0;
  double lambda = 0.0;
  double delta = 0.0;
  double f_value = 0.0;
  double residual = 0.0;  ///< y - f(x*)
};

struct ALResult {
  Vector x;
  double f_value = 0.0;
  double lambda = 0.0;
  double delta = 0.0;
  std::vector<ALRecord> log;
};

/// base + (y - f)^2 / (2 delta) - lambda (y - f) with its exact Hessian.
Objective augmented_lagrangian_objective(const Objective& base, const ScalarMap& f, double y,
                                         double lambda, double delta);

/// Inexact minimization of the augmented Lagrangian, updating the multiplier
/// and halving the penalty parameter until f(x*) lies in the interval. At
/// least one inner solve is made. Throws ConstraintUnreachable after
/// max_outer outer iterations.
ALResult augmented_lagrangian_solve(const Objective& base, const ScalarMap& f, double y,
                                    const TargetInterval& interval, const Vector& x0,
                                    const AugmentedLagrangianSettings& settings = {});

}  // namespace abimc

#endif  // ABIMC_OPTIMIZATION_HPP
