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

#include "abimc/forward_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "abimc/error.hpp"
#include "abimc/parallel.hpp"

namespace abimc {
namespace {

void check_point(Eigen::Index expected, Eigen::Index got) {
  if (expected != got) {
    throw DimensionError("forward map: expected a point of dimension " + std::to_string(expected) +
                         ", got " + std::to_string(got));
  }
}

}  // namespace

double ToyMap::value(const Eigen::Ref<const Vector>& x) const {
  check_point(2, x.size());
  return std::sin(x[0]) * std::cos(x[1]);
}

Vector ToyMap::gradient(const Eigen::Ref<const Vector>& x) const {
  check_point(2, x.size());
  Vector g(2);
  g << std::cos(x[0]) * std::cos(x[1]), -std::sin(x[0]) * std::sin(x[1]);
  return g;
}

Matrix ToyMap::hessian(const Eigen::Ref<const Vector>& x) const {
  check_point(2, x.size());
  const double s1 = std::sin(x[0]), c1 = std::cos(x[0]);
  const double s2 = std::sin(x[1]), c2 = std::cos(x[1]);
  Matrix h(2, 2);
  h << -s1 * c2, -c1 * s2, -c1 * s2, -s1 * c2;
  return h;
}

const char* to_string(MapOrder order) {
  switch (order) {
    case MapOrder::toy:
      return "toy";
    case MapOrder::quadratic:
      return "quadratic";
    case MapOrder::cubic:
      return "cubic";
  }
  return "unknown";
}

MapOrder parse_map_order(const std::string& name) {
  if (name == "toy") return MapOrder::toy;
  if (name == "quadratic") return MapOrder::quadratic;
  if (name == "cubic") return MapOrder::cubic;
  throw FormatError("unknown map order '" + name + "'");
}

void PolynomialMapSpec::validate() const {
  if (order == MapOrder::toy) throw FormatError("polynomial spec: order must be quadratic or cubic");
  if (m < 1 || m_int < 1) throw DimensionError("polynomial spec: dimensions must be positive");
  if (m_int > m) {
    throw DimensionError("polynomial spec: m_int = " + std::to_string(m_int) + " exceeds m = " +
                         std::to_string(m));
  }
  if (H.rows() != m || H.cols() != m) throw DimensionError("polynomial spec: H must be m x m");
  if (b.size() != m) throw DimensionError("polynomial spec: b must have length m");
  const auto mm = static_cast<std::size_t>(m);
  if (order == MapOrder::cubic && S.size() != mm * mm * mm) {
    throw DimensionError("polynomial spec: S must have m^3 entries");
  }
  if (order == MapOrder::quadratic && !S.empty()) {
    throw FormatError("polynomial spec: quadratic map carries a cubic tensor");
  }
  if (!H.allFinite() || !b.allFinite() || !std::isfinite(c) ||
      !std::all_of(S.begin(), S.end(), [](double v) { return std::isfinite(v); })) {
    throw FormatError("polynomial spec: non-finite coefficient");
  }
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 0.0) throw FormatError("polynomial spec: H is not symmetric");
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if ((i >= m_int || j >= m_int) && H(i, j) != 0.0) {
        throw FormatError("polynomial spec: H has entries beyond m_int");
      }
    }
    if (i >= m_int && b[i] != 0.0) throw FormatError("polynomial spec: b has entries beyond m_int");
  }
  if (!S.empty()) {
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index k = 0; k < m; ++k) {
          const auto idx = static_cast<std::size_t>((i * m + j) * m + k);
          if ((i >= m_int || j >= m_int || k >= m_int) && S[idx] != 0.0) {
            throw FormatError("polynomial spec: S has entries beyond m_int");
          }
        }
  }
}

PolynomialMap::PolynomialMap(PolynomialMapSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  n_ = spec_.m_int;
  h_ = spec_.H.topLeftCorner(n_, n_);
  b_ = spec_.b.head(n_);
  if (spec_.order == MapOrder::cubic) {
    const Eigen::Index m = spec_.m;
    slices_.assign(static_cast<std::size_t>(n_), Matrix(n_, n_));
    for (Eigen::Index i = 0; i < n_; ++i)
      for (Eigen::Index j = 0; j < n_; ++j)
        for (Eigen::Index k = 0; k < n_; ++k)
          slices_[static_cast<std::size_t>(i)](j, k) =
              spec_.S[static_cast<std::size_t>((i * m + j) * m + k)];
  }
}

Matrix PolynomialMap::contract(const Eigen::Ref<const Vector>& x) const {
  Matrix t = Matrix::Zero(n_, n_);
  for (Eigen::Index i = 0; i < n_; ++i) t.noalias() += x[i] * slices_[static_cast<std::size_t>(i)];
  return t;
}

double PolynomialMap::value(const Eigen::Ref<const Vector>& x) const {
  check_point(spec_.m, x.size());
  const auto xa = x.head(n_);
  double f = xa.dot(h_ * xa) + b_.dot(xa) + spec_.c;
  if (!slices_.empty()) f += xa.dot(contract(xa) * xa);
  return f;
}

Vector PolynomialMap::gradient(const Eigen::Ref<const Vector>& x) const {
  check_point(spec_.m, x.size());
  const auto xa = x.head(n_);
  Vector g = Vector::Zero(spec_.m);
  Vector ga = 2.0 * (h_ * xa) + b_;
  if (!slices_.empty()) ga += 3.0 * (contract(xa) * xa);
  g.head(n_) = ga;
  return g;
}

Matrix PolynomialMap::hessian(const Eigen::Ref<const Vector>& x) const {
  check_point(spec_.m, x.size());
  Matrix h = Matrix::Zero(spec_.m, spec_.m);
  Matrix ha = 2.0 * h_;
  if (!slices_.empty()) ha += 6.0 * contract(x.head(n_));
  h.topLeftCorner(n_, n_) = ha;
  return h;
}

ForwardProblem::ForwardProblem(std::shared_ptr<const ForwardMap> map, Gaussian nominal,
                               TargetInterval interval)
    : map_(std::move(map)),
      nominal_(std::move(nominal)),
      interval_(interval),
      counters_(std::make_unique<Counters>()) {
  if (!map_) throw DimensionError("forward problem: null map");
  if (map_->dim() != nominal_.dim()) {
    throw DimensionError("forward problem: map dimension " + std::to_string(map_->dim()) +
                         " differs from nominal dimension " + std::to_string(nominal_.dim()));
  }
  if (!(interval_.lo < interval_.hi)) throw DimensionError("forward problem: interval must satisfy lo < hi");
}

ForwardProblem::ForwardProblem(ForwardProblem&&) noexcept = default;
ForwardProblem& ForwardProblem::operator=(ForwardProblem&&) noexcept = default;
ForwardProblem::~ForwardProblem() = default;

double ForwardProblem::value(const Eigen::Ref<const Vector>& x) const {
  counters_->value.fetch_add(1, std::memory_order_relaxed);
  return map_->value(x);
}

Vector ForwardProblem::gradient(const Eigen::Ref<const Vector>& x) const {
  counters_->gradient.fetch_add(1, std::memory_order_relaxed);
  return map_->gradient(x);
}

Matrix ForwardProblem::hessian(const Eigen::Ref<const Vector>& x) const {
  counters_->hessian.fetch_add(1, std::memory_order_relaxed);
  return map_->hessian(x);
}

Vector ForwardProblem::values(const Eigen::Ref<const Matrix>& xs) const {
  Vector out(xs.cols());
  const auto n = static_cast<std::size_t>(xs.cols());
  const std::size_t blocks = (n + kSampleBlock - 1) / kSampleBlock;
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t end = std::min(n, (b + 1) * kSampleBlock);
    for (std::size_t j = b * kSampleBlock; j < end; ++j) {
      out[static_cast<Eigen::Index>(j)] = map_->value(xs.col(static_cast<Eigen::Index>(j)));
    }
  });
  counters_->value.fetch_add(n, std::memory_order_relaxed);
  return out;
}

OracleCounts ForwardProblem::counts() const {
  return {counters_->value.load(), counters_->gradient.load(), counters_->hessian.load()};
}

Gaussian toy_nominal() {
  Vector mean(2);
  mean << 0.0, 1.0;
  return Gaussian(mean, 0.3 * Matrix::Identity(2, 2));
}

ForwardProblem toy_problem() {
  return ForwardProblem(std::make_shared<ToyMap>(), toy_nominal(), kToyInterval);
}

Gaussian polynomial_nominal(Eigen::Index m) {
  return Gaussian(Vector::Ones(m), Matrix::Identity(m, m));
}

PolynomialMapSpec generate_polynomial(MapOrder order, Eigen::Index m, Eigen::Index m_int,
                                      const RandomStream& rng) {
  if (order == MapOrder::toy) throw FormatError("generate_polynomial: order must be quadratic or cubic");
  if (m_int < 1 || m_int > m) {
    throw DimensionError("generate_polynomial: need 1 <= m_int <= m (m = " + std::to_string(m) +
                         ", m_int = " + std::to_string(m_int) + ")");
  }
  auto engine = rng.engine();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Eigen::Index n = m_int;

  // Bartlett decomposition of W(2 I, n + 1).
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::chi_squared_distribution<double> chi2(static_cast<double>(n + 1 - i));
    a(i, i) = std::sqrt(chi2(engine));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal(engine);
  }
  Matrix w = 2.0 * (a * a.transpose());
  w = 0.5 * (w + w.transpose()).eval();

  PolynomialMapSpec spec;
  spec.order = order;
  spec.m = m;
  spec.m_int = m_int;
  spec.H = Matrix::Zero(m, m);
  spec.H.topLeftCorner(n, n) = w;
  spec.b = Vector::Zero(m);
  for (Eigen::Index i = 0; i < n; ++i) spec.b[i] = uniform(engine);
  spec.c = 0.0;

  if (order == MapOrder::cubic) {
    const auto nn = static_cast<std::size_t>(n);
    std::vector<double> raw(nn * nn * nn);
    for (std::size_t i = 0; i < nn; ++i)
      for (std::size_t j = 0; j < nn; ++j)
        for (std::size_t k = 0; k < nn; ++k) raw[(i * nn + j) * nn + k] = (i == j ? 10.0 : 0.0) + normal(engine);
    auto at = [&](std::size_t i, std::size_t j, std::size_t k) { return raw[(i * nn + j) * nn + k]; };
    const auto mm = static_cast<std::size_t>(m);
    spec.S.assign(mm * mm * mm, 0.0);
    for (std::size_t i = 0; i < nn; ++i)
      for (std::size_t j = 0; j < nn; ++j)
        for (std::size_t k = 0; k < nn; ++k) {
          spec.S[(i * mm + j) * mm + k] = (at(i, j, k) + at(i, k, j) + at(j, i, k) + at(j, k, i) +
                                           at(k, i, j) + at(k, j, i)) /
                                          6.0;
        }
  }
  return spec;
}

double pilot_probability(const ForwardMap& map, const Gaussian& nominal,
                         const TargetInterval& interval, std::uint64_t n, const RandomStream& rng) {
  const GaussianMixture p(nominal);
  const std::size_t blocks = (n + kSampleBlock - 1) / kSampleBlock;
  std::vector<std::uint64_t> hits(blocks, 0);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t count = std::min<std::uint64_t>(kSampleBlock, n - b * kSampleBlock);
    const Matrix x = sample_block(p, b, count, rng);
    for (Eigen::Index j = 0; j < x.cols(); ++j) hits[b] += interval.contains(map.value(x.col(j)));
  });
  return static_cast<double>(std::accumulate(hits.begin(), hits.end(), std::uint64_t{0})) /
         static_cast<double>(n);
}

Calibration calibrate_interval(const ForwardMap& map, const Gaussian& nominal, double target_prob,
                               std::uint64_t seed, std::uint64_t pilot_n) {
  if (!(target_prob > 0.0 && target_prob < 0.5)) {
    throw CalibrationError("calibrate_interval: target probability must lie in (0, 0.5)");
  }
  if (pilot_n < 2) throw CalibrationError("calibrate_interval: pilot size too small");
  const RandomStream rng(seed);
  const GaussianMixture p(nominal);
  std::vector<double> values(pilot_n);
  const std::size_t blocks = (pilot_n + kSampleBlock - 1) / kSampleBlock;
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t start = b * kSampleBlock;
    const std::size_t count = std::min<std::uint64_t>(kSampleBlock, pilot_n - start);
    const Matrix x = sample_block(p, b, count, rng);
    for (std::size_t j = 0; j < count; ++j) values[start + j] = map.value(x.col(static_cast<Eigen::Index>(j)));
  });

  std::vector<double> sorted = values;
  const auto n = static_cast<double>(pilot_n);
  const auto q_index = static_cast<std::size_t>(
      std::clamp(std::ceil((1.0 - target_prob) * n) - 1.0, 0.0, n - 1.0));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(q_index), sorted.end());
  const double lo = sorted[q_index];
  const std::size_t mid_index = pilot_n / 2;
  double median = lo;
  if (mid_index < q_index) {
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid_index),
                     sorted.begin() + static_cast<std::ptrdiff_t>(q_index));
    median = sorted[mid_index];
  }
  const double hi = (lo > median) ? lo + (lo - median) : lo + 1.0;

  Calibration out;
  out.interval = {lo, hi};
  out.pilot_n = pilot_n;
  out.seed = seed;
  const auto hits = static_cast<std::uint64_t>(
      std::count_if(values.begin(), values.end(), [&](double v) { return out.interval.contains(v); }));
  out.pilot_estimate = static_cast<double>(hits) / n;
  if (hits < 3) {
    throw CalibrationError("calibrate_interval: pilot of " + std::to_string(pilot_n) + " produced " +
                           std::to_string(hits) + " hits (need at least 3)");
  }
  if (out.pilot_estimate < 0.5 * target_prob || out.pilot_estimate > 2.0 * target_prob) {
    throw CalibrationError("calibrate_interval: pilot estimate " + std::to_string(out.pilot_estimate) +
                           " is not within a factor 2 of " + std::to_string(target_prob));
  }
  return out;
}

}  // namespace abimc
