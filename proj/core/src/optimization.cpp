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

#include "abimc/optimization.hpp"

#include <cmath>
#include <memory>
#include <optional>

#include "abimc/error.hpp"

namespace abimc {
namespace {

// Positive tau with |z + tau d| = radius.
double boundary_step(const Vector& z, const Vector& d, double radius) {
  const double a = d.squaredNorm();
  const double b = 2.0 * z.dot(d);
  const double c = z.squaredNorm() - radius * radius;
  const double disc = std::sqrt(std::max(0.0, b * b - 4.0 * a * c));
  // Stable root of the quadratic; c <= 0 guarantees a non-negative root.
  return (b >= 0.0) ? (-2.0 * c) / (b + disc) : (-b + disc) / (2.0 * a);
}

Matrix hessian_of(const Objective& obj, const Vector& x) {
  return obj.hessian ? obj.hessian(x) : finite_difference_hessian(obj, x);
}

}  // namespace

Matrix finite_difference_hessian(const Objective& obj, const Vector& x, double step) {
  const Eigen::Index m = x.size();
  Matrix h(m, m);
  Vector xp = x, xm = x;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double hi = step * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + hi;
    xm[i] = x[i] - hi;
    h.col(i) = (obj.gradient(xp) - obj.gradient(xm)) / (2.0 * hi);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return 0.5 * (h + h.transpose());
}

Vector steihaug_cg(const Vector& g, const Matrix& h, double radius, double tolerance, int max_iters) {
  Vector z = Vector::Zero(g.size());
  Vector r = g;
  Vector d = -r;
  if (r.norm() <= tolerance) return z;
  for (int j = 0; j < max_iters; ++j) {
    const Vector hd = h * d;
    const double curvature = d.dot(hd);
    if (!(curvature > 0.0)) return z + boundary_step(z, d, radius) * d;
    const double rr = r.squaredNorm();
    const double alpha = rr / curvature;
    const Vector z_next = z + alpha * d;
    if (z_next.norm() >= radius) return z + boundary_step(z, d, radius) * d;
    r += alpha * hd;
    if (r.norm() <= tolerance) return z_next;
    d = -r + (r.squaredNorm() / rr) * d;
    z = z_next;
  }
  return z;
}

TrustRegionResult trust_region_minimize(const Objective& obj, const Vector& x0,
                                        const TrustRegionSettings& settings) {
  TrustRegionResult out;
  out.x = x0;
  out.value = obj.value(out.x);
  if (!std::isfinite(out.value)) throw ObjectiveBlewUp("objective blew up: non-finite value at start", x0);
  out.gradient = obj.gradient(out.x);
  if (!out.gradient.allFinite()) throw ObjectiveBlewUp("objective blew up: non-finite gradient at start", x0);

  const double g0 = out.gradient.norm();
  const double target = settings.grad_reduction_factor * g0;
  if (g0 == 0.0) {
    out.status = TrustRegionStatus::gradient_reduced;
    return out;
  }
  Matrix h = hessian_of(obj, out.x);
  double radius = settings.initial_radius;
  const int cg_iters = 2 * static_cast<int>(x0.size()) + 10;

  out.status = TrustRegionStatus::max_iterations;
  while (out.iterations < settings.max_iters) {
    const double gnorm = out.gradient.norm();
    if (gnorm <= target) {
      out.status = TrustRegionStatus::gradient_reduced;
      break;
    }
    ++out.iterations;
    const double cg_tol = std::min(0.5, std::sqrt(gnorm)) * gnorm;
    const Vector p = steihaug_cg(out.gradient, h, radius, cg_tol, cg_iters);
    const double pnorm = p.norm();
    const double predicted = -(out.gradient.dot(p) + 0.5 * p.dot(h * p));
    const Vector trial = out.x + p;
    const double trial_value = obj.value(trial);

    if (!std::isfinite(trial_value) || !(predicted > 0.0)) {
      radius = settings.shrink_ratio * (pnorm > 0.0 ? pnorm : radius);
    } else {
      const double rho = (out.value - trial_value) / predicted;
      if (rho < settings.shrink_ratio) {
        radius = settings.shrink_ratio * pnorm;
      } else if (rho > settings.expand_ratio && pnorm >= 0.99 * radius) {
        radius = std::min(2.0 * radius, settings.max_radius);
      }
      if (rho > settings.accept_ratio && trial_value < out.value) {
        out.x = trial;
        out.value = trial_value;
        out.gradient = obj.gradient(out.x);
        if (!out.gradient.allFinite()) {
          throw ObjectiveBlewUp("objective blew up: non-finite gradient", out.x);
        }
        if (settings.stop_when && settings.stop_when(out.x, out.value)) {
          out.status = TrustRegionStatus::stopped;
          return out;
        }
        h = hessian_of(obj, out.x);
      }
    }
    if (radius < settings.min_radius) {
      out.status = TrustRegionStatus::radius_collapsed;
      return out;
    }
  }
  if (out.status == TrustRegionStatus::max_iterations && out.gradient.norm() <= target) {
    out.status = TrustRegionStatus::gradient_reduced;
  }
  return out;
}

ScalarMap as_scalar_map(const ForwardProblem& problem) {
  const ForwardProblem* p = &problem;
  return {[p](const Vector& x) { return p->value(x); },
          [p](const Vector& x) { return p->gradient(x); },
          [p](const Vector& x) { return p->hessian(x); }};
}

namespace {

template <class T>
struct LastQuery {
  std::optional<Vector> x;
  T result{};
};

bool same_point(const std::optional<Vector>& a, const Vector& b) {
  return a && a->size() == b.size() && *a == b;
}

}  // namespace

ScalarMap memoize(const ScalarMap& f) {
  auto value_cache = std::make_shared<LastQuery<double>>();
  auto gradient_cache = std::make_shared<LastQuery<Vector>>();
  auto hessian_cache = std::make_shared<LastQuery<Matrix>>();
  ScalarMap out;
  out.value = [f, value_cache](const Vector& x) {
    if (!same_point(value_cache->x, x)) {
      value_cache->result = f.value(x);
      value_cache->x = x;
    }
    return value_cache->result;
  };
  out.gradient = [f, gradient_cache](const Vector& x) {
    if (!same_point(gradient_cache->x, x)) {
      gradient_cache->result = f.gradient(x);
      gradient_cache->x = x;
    }
    return gradient_cache->result;
  };
  out.hessian = [f, hessian_cache](const Vector& x) {
    if (!same_point(hessian_cache->x, x)) {
      hessian_cache->result = f.hessian(x);
      hessian_cache->x = x;
    }
    return hessian_cache->result;
  };
  return out;
}

Objective augmented_lagrangian_objective(const Objective& base, const ScalarMap& f, double y,
                                         double lambda, double delta) {
  Objective out;
  out.value = [=](const Vector& x) {
    const double r = y - f.value(x);
    return base.value(x) + r * r / (2.0 * delta) - lambda * r;
  };
  out.gradient = [=](const Vector& x) {
    const double r = y - f.value(x);
    return Vector(base.gradient(x) + (lambda - r / delta) * f.gradient(x));
  };
  out.hessian = [=](const Vector& x) {
    const double r = y - f.value(x);
    const Vector g = f.gradient(x);
    const Matrix hb = base.hessian ? base.hessian(x) : finite_difference_hessian(base, x);
    return Matrix(hb + (g * g.transpose()) / delta + (lambda - r / delta) * f.hessian(x));
  };
  return out;
}

ALResult augmented_lagrangian_solve(const Objective& base, const ScalarMap& f, double y,
                                    const TargetInterval& interval, const Vector& x0,
                                    const AugmentedLagrangianSettings& settings) {
  if (!(settings.delta0 > 0.0)) throw ConstraintUnreachable("augmented Lagrangian: delta0 must be positive");
  ALResult out;
  out.x = x0;
  double lambda = settings.lambda0;
  double delta = settings.delta0;
  for (int outer = 1; outer <= settings.max_outer; ++outer) {
    const Objective lagrangian = augmented_lagrangian_objective(base, f, y, lambda, delta);
    out.x = trust_region_minimize(lagrangian, out.x, settings.inner).x;
    out.f_value = f.value(out.x);
    const double r = y - out.f_value;
    out.log.push_back({outer, lambda, delta, out.f_value, r});
    out.lambda = lambda;
    out.delta = delta;
    if (interval.contains(out.f_value)) return out;
    lambda = lambda - r / delta;
    delta *= 0.5;
  }
  throw ConstraintUnreachable("constraint unreachable: f(x) not in [" + std::to_string(interval.lo) +
                              ", " + std::to_string(interval.hi) + "] after " +
                              std::to_string(settings.max_outer) + " outer iterations");
}

}  // namespace abimc
