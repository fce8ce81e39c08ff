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

#ifndef ABIMC_SURROGATE_HPP
#define ABIMC_SURROGATE_HPP

#include <cstddef>
#include <functional>
#include <vector>

#include "abimc/distributions.hpp"
#include "abimc/forward_models.hpp"
#include "abimc/stage1.hpp"

namespace abimc {

/// Second-order Taylor expansion about the nearest fixed charge. Never
/// queries the forward map.
class TaylorSurrogate {
 public:
  explicit TaylorSurrogate(const FixedChargeSet& charges);

  std::size_t size() const { return values_.size(); }
  Eigen::Index dim() const { return points_.rows(); }

  /// Index of the nearest charge; ties go to the lowest index.
  std::size_t nearest(const Eigen::Ref<const Vector>& x) const;
  double evaluate(const Eigen::Ref<const Vector>& x) const;
  Vector evaluate_batch(const Eigen::Ref<const Matrix>& xs) const;

 private:
  Matrix points_;     // m x n
  Vector values_;     // n
  Matrix gradients_;  // m x n
  std::vector<Matrix> hessians_;
};

/// Batched log-density: one value per column.
using LogDensity = std::function<Vector(const Eigen::Ref<const Matrix>&)>;

/// log p(x) where the surrogate lands in the interval, -infinity elsewhere.
LogDensity surrogate_target_log_density(const TaylorSurrogate& surrogate, const Gaussian& nominal,
                                        const TargetInterval& interval);

}  // namespace abimc

#endif  // ABIMC_SURROGATE_HPP
