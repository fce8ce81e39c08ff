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

#ifndef ABIMC_DISTRIBUTIONS_HPP
#define ABIMC_DISTRIBUTIONS_HPP

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "abimc/random.hpp"

namespace abimc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Samples are drawn in fixed-size blocks; block b always uses substream b.
inline constexpr std::size_t kSampleBlock = 4096;

/// Multivariate normal with a cached lower Cholesky factor.
class Gaussian {
 public:
  Gaussian(Vector mean, Matrix covariance);

  Eigen::Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return covariance_; }
  /// Lower-triangular L with L L^T = covariance.
  const Matrix& cholesky() const { return chol_; }
  double log_det() const { return log_det_; }

  double log_pdf(const Eigen::Ref<const Vector>& x) const;
  /// Log-density of every column of xs.
  Vector log_pdf_batch(const Eigen::Ref<const Matrix>& xs) const;

  /// Maps standard normal draws (columns of z) to draws from this Gaussian.
  Matrix transform(const Eigen::Ref<const Matrix>& z) const;

 private:
  Vector mean_;
  Matrix covariance_;
  Matrix chol_;
  double log_det_ = 0.0;
};

/// Finite Gaussian mixture with strictly positive weights summing to one.
class GaussianMixture {
 public:
  GaussianMixture(std::vector<Gaussian> components, std::vector<double> weights);
  explicit GaussianMixture(Gaussian single);

  std::size_t size() const { return components_.size(); }
  Eigen::Index dim() const { return components_.front().dim(); }
  const Gaussian& component(std::size_t k) const { return components_[k]; }
  const std::vector<Gaussian>& components() const { return components_; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::size_t k) const { return weights_[k]; }

  double log_pdf(const Eigen::Ref<const Vector>& x) const;
  Vector log_pdf_batch(const Eigen::Ref<const Matrix>& xs) const;

  /// Row k holds log(alpha_k) + log q_k(x_j) for each column j.
  Matrix weighted_component_log_pdf(const Eigen::Ref<const Matrix>& xs) const;

 private:
  std::vector<Gaussian> components_;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
};

/// Rescales positive weights to sum to one. Throws InvalidWeights when any
/// weight is negative or non-finite, or when all are zero.
std::vector<double> normalize_weights(std::vector<double> weights);

/// One block of draws (columns). Block b of size count is a deterministic
/// function of (mixture, rng, b) so that larger sample sets extend smaller
/// ones drawn with the same stream.
Matrix sample_block(const GaussianMixture& q, std::size_t block, std::size_t count,
                    const RandomStream& rng);

/// n draws from q as an m x n matrix.
Matrix sample(const GaussianMixture& q, std::size_t n, const RandomStream& rng);

/// log of the integral of a(x) b(x) dx.
double log_gaussian_overlap(const Gaussian& a, const Gaussian& b);
double gaussian_overlap(const Gaussian& a, const Gaussian& b);

struct TruncatedMoments {
  double mean = 0.0;
  double variance = 0.0;
  double mass = 1.0;      ///< P(lo <= X <= hi)
  double log_mass = 0.0;
};

/// Mean and variance of N(mean, variance) conditioned on [lo, hi]; hi may be
/// +infinity and lo may be -infinity.
TruncatedMoments truncated_moments(double mean, double variance, double lo, double hi);

/// Monte Carlo estimate of KL(from || to) with n draws from `from`.
double sample_kl_divergence(const GaussianMixture& from, const GaussianMixture& to, std::size_t n,
                            const RandomStream& rng);

/// Standard normal CDF, stable in both tails.
double normal_cdf(double z);
/// log of the standard normal CDF.
double log_normal_cdf(double z);

}  // namespace abimc

#endif  // ABIMC_DISTRIBUTIONS_HPP
