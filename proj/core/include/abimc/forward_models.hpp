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

#ifndef ABIMC_FORWARD_MODELS_HPP
#define ABIMC_FORWARD_MODELS_HPP

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "abimc/distributions.hpp"
#include "abimc/random.hpp"

namespace abimc {

struct TargetInterval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double y) const { return y >= lo && y <= hi; }
  double width() const { return hi - lo; }
  double midpoint() const { return 0.5 * (lo + hi); }
};

/// Oracle query counts, one counter per query kind.
struct OracleCounts {
  std::uint64_t value = 0;
  std::uint64_t gradient = 0;
  std::uint64_t hessian = 0;

  OracleCounts operator-(const OracleCounts& o) const {
    return {value - o.value, gradient - o.gradient, hessian - o.hessian};
  }
  OracleCounts operator+(const OracleCounts& o) const {
    return {value + o.value, gradient + o.gradient, hessian + o.hessian};
  }
  bool operator==(const OracleCounts&) const = default;
};

/// Smooth scalar map with analytic first and second derivatives.
class ForwardMap {
 public:
  virtual ~ForwardMap() = default;
  virtual Eigen::Index dim() const = 0;
  virtual double value(const Eigen::Ref<const Vector>& x) const = 0;
  virtual Vector gradient(const Eigen::Ref<const Vector>& x) const = 0;
  virtual Matrix hessian(const Eigen::Ref<const Vector>& x) const = 0;
};

/// f(x) = sin(x1) cos(x2).
class ToyMap final : public ForwardMap {
 public:
  Eigen::Index dim() const override { return 2; }
  double value(const Eigen::Ref<const Vector>& x) const override;
  Vector gradient(const Eigen::Ref<const Vector>& x) const override;
  Matrix hessian(const Eigen::Ref<const Vector>& x) const override;
};

enum class MapOrder { toy, quadratic, cubic };

const char* to_string(MapOrder order);
MapOrder parse_map_order(const std::string& name);

/// Coefficients of f(x) = S:xxx + x^T H x + b^T x + c.
struct PolynomialMapSpec {
  MapOrder order = MapOrder::quadratic;
  Eigen::Index m = 0;
  Eigen::Index m_int = 0;
  /// Row-major m*m*m tensor, S[(i*m + j)*m + k]; empty for quadratic maps.
  std::vector<double> S;
  Matrix H;
  Vector b;
  double c = 0.0;

  /// Throws DimensionError or FormatError on inconsistent data.
  void validate() const;
};

/// Polynomial map evaluated on the leading m_int coordinates only; the
/// remaining coordinates have zero coefficients.
class PolynomialMap final : public ForwardMap {
 public:
  explicit PolynomialMap(PolynomialMapSpec spec);

  const PolynomialMapSpec& spec() const { return spec_; }
  Eigen::Index dim() const override { return spec_.m; }
  double value(const Eigen::Ref<const Vector>& x) const override;
  Vector gradient(const Eigen::Ref<const Vector>& x) const override;
  Matrix hessian(const Eigen::Ref<const Vector>& x) const override;

 private:
  // T_jk = sum_i S_ijk x_i over the active block.
  Matrix contract(const Eigen::Ref<const Vector>& x) const;

  PolynomialMapSpec spec_;
  Eigen::Index n_ = 0;                // active dimension
  std::vector<Matrix> slices_;        // slices_[i](j, k) = S_ijk, active block
  Matrix h_;                          // active block of H
  Vector b_;                          // active block of b
};

/// Forward map plus nominal density and target interval, with atomic oracle
/// counters. Move-only: counters belong to one problem instance.
class ForwardProblem {
 public:
  ForwardProblem(std::shared_ptr<const ForwardMap> map, Gaussian nominal, TargetInterval interval);
  ForwardProblem(ForwardProblem&&) noexcept;
  ForwardProblem& operator=(ForwardProblem&&) noexcept;
  ForwardProblem(const ForwardProblem&) = delete;
  ForwardProblem& operator=(const ForwardProblem&) = delete;
  ~ForwardProblem();

  Eigen::Index dim() const { return map_->dim(); }
  const Gaussian& nominal() const { return nominal_; }
  const TargetInterval& interval() const { return interval_; }
  /// Uncounted access to the underlying map.
  const ForwardMap& map() const { return *map_; }
  std::shared_ptr<const ForwardMap> shared_map() const { return map_; }

  double value(const Eigen::Ref<const Vector>& x) const;
  Vector gradient(const Eigen::Ref<const Vector>& x) const;
  Matrix hessian(const Eigen::Ref<const Vector>& x) const;
  /// Values for every column of xs; counts one value query per column.
  Vector values(const Eigen::Ref<const Matrix>& xs) const;

  OracleCounts counts() const;

 private:
  struct Counters {
    std::atomic<std::uint64_t> value{0};
    std::atomic<std::uint64_t> gradient{0};
    std::atomic<std::uint64_t> hessian{0};
  };

  std::shared_ptr<const ForwardMap> map_;
  Gaussian nominal_;
  TargetInterval interval_;
  std::unique_ptr<Counters> counters_;
};

/// Target interval of the shipped toy problem.
inline constexpr TargetInterval kToyInterval{0.5841, 1.0};

/// Toy problem: f = sin(x1)cos(x2), p = N([0,1], 0.3 I).
ForwardProblem toy_problem();
Gaussian toy_nominal();

/// Random quadratic or cubic map of the synthetic benchmark family.
PolynomialMapSpec generate_polynomial(MapOrder order, Eigen::Index m, Eigen::Index m_int,
                                      const RandomStream& rng);

/// Nominal density used by the polynomial family, N(1, I).
Gaussian polynomial_nominal(Eigen::Index m);

struct Calibration {
  TargetInterval interval;
  std::uint64_t pilot_n = 0;
  double pilot_estimate = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr std::uint64_t kDefaultPilotSize = 10'000'000;

/// Chooses an interval whose plain Monte Carlo probability under the nominal
/// density is close to target_prob. lo is the empirical (1 - target_prob)
/// quantile of f; hi = lo + (lo - median). The pilot is run on the uncounted
/// map. Throws CalibrationError with fewer than 3 pilot hits or when the pilot
/// estimate is not within a factor 2 of target_prob.
Calibration calibrate_interval(const ForwardMap& map, const Gaussian& nominal, double target_prob,
                               std::uint64_t seed, std::uint64_t pilot_n = kDefaultPilotSize);

/// Plain Monte Carlo probability of map(X) in interval, X ~ nominal, on the
/// uncounted map.
double pilot_probability(const ForwardMap& map, const Gaussian& nominal,
                         const TargetInterval& interval, std::uint64_t n, const RandomStream& rng);

}  // namespace abimc

#endif  // ABIMC_FORWARD_MODELS_HPP
