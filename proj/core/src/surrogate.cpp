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

#include "abimc/surrogate.hpp"

#include <limits>
#include <memory>

#include "abimc/error.hpp"

namespace abimc {

TaylorSurrogate::TaylorSurrogate(const FixedChargeSet& charges) {
  if (charges.empty()) throw DimensionError("TaylorSurrogate: no charges");
  const Eigen::Index m = charges[0].point.size();
  const auto n = static_cast<Eigen::Index>(charges.size());
  points_.resize(m, n);
  values_.resize(n);
  gradients_.resize(m, n);
  hessians_.reserve(charges.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = charges[static_cast<std::size_t>(i)];
    points_.col(i) = r.point;
    values_[i] = r.value;
    gradients_.col(i) = r.gradient;
    hessians_.push_back(r.hessian);
  }
}

std::size_t TaylorSurrogate::nearest(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != dim()) throw DimensionError("TaylorSurrogate: dimension mismatch");
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < points_.cols(); ++i) {
    const double d = (points_.col(i) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return static_cast<std::size_t>(best);
}

double TaylorSurrogate::evaluate(const Eigen::Ref<const Vector>& x) const {
  const auto i = nearest(x);
  const auto col = static_cast<Eigen::Index>(i);
  const Vector d = x - points_.col(col);
  return values_[col] + gradients_.col(col).dot(d) + 0.5 * d.dot(hessians_[i] * d);
}

Vector TaylorSurrogate::evaluate_batch(const Eigen::Ref<const Matrix>& xs) const {
  Vector out(xs.cols());
  for (Eigen::Index j = 0; j < xs.cols(); ++j) out[j] = evaluate(xs.col(j));
  return out;
}

LogDensity surrogate_target_log_density(const TaylorSurrogate& surrogate, const Gaussian& nominal,
                                        const TargetInterval& interval) {
  auto s = std::make_shared<const TaylorSurrogate>(surrogate);
  auto p = std::make_shared<const Gaussian>(nominal);
  return [s, p, interval](const Eigen::Ref<const Matrix>& xs) {
    Vector out = p->log_pdf_batch(xs);
    for (Eigen::Index j = 0; j < xs.cols(); ++j) {
      if (!interval.contains(s->evaluate(xs.col(j)))) out[j] = -std::numeric_limits<double>::infinity();
    }
    return out;
  };
}

}  // namespace abimc
