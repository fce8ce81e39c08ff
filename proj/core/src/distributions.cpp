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

#include "abimc/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>

#include "abimc/error.hpp"
#include "abimc/parallel.hpp"

namespace abimc {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinMass = 1e-300;

void check_dim(Eigen::Index expected, Eigen::Index got, const char* what) {
  if (expected != got) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(expected) +
                         ", got " + std::to_string(got));
  }
}

// exp(x^2) erfc(x) for x >= 0.
double erfcx(double x) {
  if (x < 26.0) return std::exp(x * x) * std::erfc(x);
  const double inv2 = 1.0 / (x * x);
  const double series = 1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2;
  return series / (x * std::sqrt(std::numbers::pi));
}

// Upper tail Q(t) = P(Z > t) written as exp(-t^2/2) * R(t) for t >= 0.
double upper_tail_scaled(double t) {
  if (t == kInf) return 0.0;
  return 0.5 * erfcx(t / std::numbers::sqrt2);
}

// Truncated standard normal on [a, b] with 0 <= a < b <= inf.
TruncatedMoments upper_tail_moments(double a, double b) {
  const double ra = upper_tail_scaled(a);
  // exp(-(b^2 - a^2)/2), zero when b is infinite.
  const double decay = (b == kInf) ? 0.0 : std::exp(-0.5 * (b - a) * (b + a));
  const double rb = upper_tail_scaled(b);
  const double scaled_mass = ra - rb * decay;
  TruncatedMoments out;
  if (!(scaled_mass > 0.0)) {
    out.log_mass = -kInf;
    return out;
  }
  out.log_mass = -0.5 * a * a + std::log(scaled_mass);
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  const double phi_a = inv_sqrt_2pi / scaled_mass;          // phi(a)/Z
  const double phi_b = inv_sqrt_2pi * decay / scaled_mass;  // phi(b)/Z
  const double b_phi_b = (b == kInf) ? 0.0 : b * phi_b;
  out.mean = phi_a - phi_b;
  out.variance = 1.0 + a * phi_a - b_phi_b - out.mean * out.mean;
  return out;
}

// Truncated standard normal on [a, b] with a < 0 < b.
TruncatedMoments central_moments(double a, double b) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  const double mass = normal_cdf(b) - normal_cdf(a);
  TruncatedMoments out;
  if (!(mass > 0.0)) {
    out.log_mass = -kInf;
    return out;
  }
  out.log_mass = std::log(mass);
  const double pa = (a == -kInf) ? 0.0 : inv_sqrt_2pi * std::exp(-0.5 * a * a);
  const double pb = (b == kInf) ? 0.0 : inv_sqrt_2pi * std::exp(-0.5 * b * b);
  const double a_pa = (a == -kInf) ? 0.0 : a * pa;
  const double b_pb = (b == kInf) ? 0.0 : b * pb;
  out.mean = (pa - pb) / mass;
  out.variance = 1.0 + (a_pa - b_pb) / mass - out.mean * out.mean;
  return out;
}

double log_sum_exp(const Eigen::Ref<const Vector>& v) {
  const double top = v.maxCoeff();
  if (top == -kInf) return -kInf;
  return top + std::log((v.array() - top).exp().sum());
}

}  // namespace

Gaussian::Gaussian(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  const Eigen::Index m = mean_.size();
  if (m == 0) throw DimensionError("Gaussian: empty mean");
  if (covariance_.rows() != m || covariance_.cols() != m) {
    throw DimensionError("Gaussian: covariance is " + std::to_string(covariance_.rows()) + "x" +
                         std::to_string(covariance_.cols()) + ", mean has length " +
                         std::to_string(m));
  }
  if (!mean_.allFinite() || !covariance_.allFinite()) {
    throw InvalidCovariance("Gaussian: non-finite mean or covariance");
  }
  const double scale = covariance_.cwiseAbs().maxCoeff();
  if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvalidCovariance("Gaussian: covariance is not symmetric");
  }
  covariance_ = 0.5 * (covariance_ + covariance_.transpose()).eval();
  Eigen::LLT<Matrix> llt(covariance_);
  if (llt.info() != Eigen::Success) {
    throw RankDeficientCovariance("Gaussian: rank-deficient covariance (factorization failed)");
  }
  chol_ = llt.matrixL();
  const Vector diag = chol_.diagonal();
  if (!(diag.minCoeff() >= 1e-10 * diag.maxCoeff())) {
    throw RankDeficientCovariance("Gaussian: rank-deficient covariance (factor diagonal ratio " +
                                  std::to_string(diag.minCoeff() / diag.maxCoeff()) + ")");
  }
  log_det_ = 2.0 * diag.array().log().sum();
}

double Gaussian::log_pdf(const Eigen::Ref<const Vector>& x) const {
  check_dim(dim(), x.size(), "Gaussian::log_pdf");
  Vector z = x - mean_;
  chol_.triangularView<Eigen::Lower>().solveInPlace(z);
  return -0.5 * (static_cast<double>(dim()) * kLog2Pi + log_det_ + z.squaredNorm());
}

Vector Gaussian::log_pdf_batch(const Eigen::Ref<const Matrix>& xs) const {
  check_dim(dim(), xs.rows(), "Gaussian::log_pdf");
  Matrix z = xs.colwise() - mean_;
  chol_.triangularView<Eigen::Lower>().solveInPlace(z);
  const double base = -0.5 * (static_cast<double>(dim()) * kLog2Pi + log_det_);
  return (base - 0.5 * z.colwise().squaredNorm().array()).matrix().transpose();
}

Matrix Gaussian::transform(const Eigen::Ref<const Matrix>& z) const {
  check_dim(dim(), z.rows(), "Gaussian::transform");
  Matrix x = chol_.triangularView<Eigen::Lower>() * z;
  x.colwise() += mean_;
  return x;
}

std::vector<double> normalize_weights(std::vector<double> weights) {
  if (weights.empty()) throw InvalidWeights("mixture weights: empty");
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidWeights("mixture weights: negative or non-finite");
    total += w;
  }
  if (!(total > 0.0)) throw InvalidWeights("mixture weights: all zero");
  for (double& w : weights) w /= total;
  return weights;
}

GaussianMixture::GaussianMixture(std::vector<Gaussian> components, std::vector<double> weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
  if (components_.empty()) throw InvalidWeights("mixture: no components");
  if (components_.size() != weights_.size()) {
    throw DimensionError("mixture: " + std::to_string(components_.size()) + " components but " +
                         std::to_string(weights_.size()) + " weights");
  }
  double total = 0.0;
  for (const auto& c : components_) check_dim(components_.front().dim(), c.dim(), "mixture");
  for (double w : weights_) {
    if (!std::isfinite(w) || !(w > 0.0)) throw InvalidWeights("mixture: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InvalidWeights("mixture: weights sum to " + std::to_string(total));
  }
  log_weights_.reserve(weights_.size());
  for (double w : weights_) log_weights_.push_back(std::log(w));
}

GaussianMixture::GaussianMixture(Gaussian single)
    : GaussianMixture(std::vector<Gaussian>{std::move(single)}, std::vector<double>{1.0}) {}

Matrix GaussianMixture::weighted_component_log_pdf(const Eigen::Ref<const Matrix>& xs) const {
  check_dim(dim(), xs.rows(), "GaussianMixture");
  Matrix out(static_cast<Eigen::Index>(size()), xs.cols());
  for (std::size_t k = 0; k < size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) =
        (components_[k].log_pdf_batch(xs).array() + log_weights_[k]).matrix().transpose();
  }
  return out;
}

double GaussianMixture::log_pdf(const Eigen::Ref<const Vector>& x) const {
  check_dim(dim(), x.size(), "GaussianMixture::log_pdf");
  Vector terms(static_cast<Eigen::Index>(size()));
  for (std::size_t k = 0; k < size(); ++k) {
    terms[static_cast<Eigen::Index>(k)] = log_weights_[k] + components_[k].log_pdf(x);
  }
  return log_sum_exp(terms);
}

Vector GaussianMixture::log_pdf_batch(const Eigen::Ref<const Matrix>& xs) const {
  check_dim(dim(), xs.rows(), "GaussianMixture::log_pdf");
  const Eigen::Index n = xs.cols();
  Vector out(n);
  const auto chunk = static_cast<Eigen::Index>(kSampleBlock);
  const auto chunks = static_cast<std::size_t>((n + chunk - 1) / chunk);
  parallel_for(chunks, [&](std::size_t c) {
    const Eigen::Index start = static_cast<Eigen::Index>(c) * chunk;
    const Eigen::Index len = std::min(chunk, n - start);
    const Matrix terms = weighted_component_log_pdf(xs.middleCols(start, len));
    for (Eigen::Index j = 0; j < len; ++j) out[start + j] = log_sum_exp(terms.col(j));
  });
  return out;
}

Matrix sample_block(const GaussianMixture& q, std::size_t block, std::size_t count,
                    const RandomStream& rng) {
  const Eigen::Index m = q.dim();
  const auto n = static_cast<Eigen::Index>(count);
  auto engine = rng.child(block).engine();
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> cumulative(q.weights().size());
  std::partial_sum(q.weights().begin(), q.weights().end(), cumulative.begin());

  Matrix z(m, n);
  std::vector<std::size_t> label(count);
  std::vector<Eigen::Index> per_component(q.size(), 0);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double u = uniform(engine) * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto k = std::min(static_cast<std::size_t>(it - cumulative.begin()), q.size() - 1);
    label[static_cast<std::size_t>(j)] = k;
    ++per_component[k];
    for (Eigen::Index i = 0; i < m; ++i) z(i, j) = normal(engine);
  }
  if (q.size() == 1) return q.component(0).transform(z);

  Matrix x(m, n);
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (per_component[k] == 0) continue;
    Matrix zk(m, per_component[k]);
    std::vector<Eigen::Index> cols;
    cols.reserve(static_cast<std::size_t>(per_component[k]));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (label[static_cast<std::size_t>(j)] == k) {
        zk.col(static_cast<Eigen::Index>(cols.size())) = z.col(j);
        cols.push_back(j);
      }
    }
    const Matrix xk = q.component(k).transform(zk);
    for (std::size_t c = 0; c < cols.size(); ++c) x.col(cols[c]) = xk.col(static_cast<Eigen::Index>(c));
  }
  return x;
}

Matrix sample(const GaussianMixture& q, std::size_t n, const RandomStream& rng) {
  Matrix out(q.dim(), static_cast<Eigen::Index>(n));
  const std::size_t blocks = (n + kSampleBlock - 1) / kSampleBlock;
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t start = b * kSampleBlock;
    const std::size_t count = std::min(kSampleBlock, n - start);
    out.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count)) =
        sample_block(q, b, count, rng);
  });
  return out;
}

double log_gaussian_overlap(const Gaussian& a, const Gaussian& b) {
  check_dim(a.dim(), b.dim(), "gaussian_overlap");
  const Gaussian diff(Vector::Zero(a.dim()), a.covariance() + b.covariance());
  return diff.log_pdf(a.mean() - b.mean());
}

double gaussian_overlap(const Gaussian& a, const Gaussian& b) {
  return std::exp(log_gaussian_overlap(a, b));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double log_normal_cdf(double z) {
  if (z > 0.0) return std::log1p(-normal_cdf(-z));
  if (z > -5.0) return std::log(normal_cdf(z));
  return std::log(upper_tail_scaled(-z)) - 0.5 * z * z;
}

TruncatedMoments truncated_moments(double mean, double variance, double lo, double hi) {
  if (!(variance > 0.0) || !std::isfinite(variance) || !std::isfinite(mean)) {
    throw InvalidCovariance("truncated_moments: variance must be positive and finite");
  }
  if (!(lo < hi) || std::isnan(lo) || std::isnan(hi)) {
    throw DimensionError("truncated_moments: empty interval");
  }
  const double sd = std::sqrt(variance);
  double a = (lo - mean) / sd;
  double b = (hi - mean) / sd;
  bool reflected = false;
  if (b <= 0.0) {
    // Lower tail: reflect so both endpoints are non-negative.
    std::swap(a, b);
    a = -a;
    b = -b;
    reflected = true;
  }
  TruncatedMoments std_moments = (a >= 0.0) ? upper_tail_moments(a, b) : central_moments(a, b);
  if (!(std_moments.log_mass >= std::log(kMinMass))) {
    throw IntervalUnreachable("interval unreachable: mass of [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "] under N(" + std::to_string(mean) + ", " +
                              std::to_string(variance) + ") underflows");
  }
  TruncatedMoments out;
  const double z_mean = reflected ? -std_moments.mean : std_moments.mean;
  out.mean = std::clamp(mean + sd * z_mean, lo, hi);
  out.variance = std::clamp(variance * std_moments.variance, 0.0, variance);
  out.log_mass = std::min(std_moments.log_mass, 0.0);
  out.mass = std::exp(out.log_mass);
  return out;
}

double sample_kl_divergence(const GaussianMixture& from, const GaussianMixture& to, std::size_t n,
                            const RandomStream& rng) {
  check_dim(from.dim(), to.dim(), "sample_kl_divergence");
  if (n == 0) throw DimensionError("sample_kl_divergence: n must be positive");
  const Matrix x = sample(from, n, rng);
  const Vector diff = from.log_pdf_batch(x) - to.log_pdf_batch(x);
  return diff.sum() / static_cast<double>(n);
}

}  // namespace abimc
