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

#include "abimc/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "abimc/error.hpp"
#include "abimc/parallel.hpp"

namespace abimc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Per-block, per-component terms below this fraction of the largest term are
// dropped from the moment sums.
constexpr double kNegligible = 1e-14;

// Importance-weighted sums, all scaled by exp(-shift).
struct Accumulator {
  double shift = -kInf;
  double w = 0.0;        // sum e^{lw - shift}
  double t = 0.0;        // sum e^{lw - shift} (lw - shift)
  std::size_t hits = 0;
  Vector a;              // per component: sum e^{..} rho_k
  Matrix s1;             // m x K: sum e^{..} rho_k (x - m_k)
  std::vector<Matrix> s2;

  Accumulator(Eigen::Index m, std::size_t k)
      : a(Vector::Zero(static_cast<Eigen::Index>(k))),
        s1(Matrix::Zero(m, static_cast<Eigen::Index>(k))),
        s2(k, Matrix::Zero(m, m)) {}

  void rescale(double new_shift) {
    if (shift == new_shift) return;
    if (shift == -kInf) {
      shift = new_shift;
      return;
    }
    const double delta = shift - new_shift;
    const double f = std::exp(delta);
    t = f * (t + delta * w);
    w *= f;
    a *= f;
    s1 *= f;
    for (auto& s : s2) s *= f;
    shift = new_shift;
  }
};

void accumulate_block(Accumulator& acc, const GaussianMixture& q, const Matrix& x, const LogDensity& target) {
  const Vector log_target = target(x);
  std::vector<Eigen::Index> hit_cols;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (log_target[j] > -kInf) hit_cols.push_back(j);
  }
  if (hit_cols.empty()) return;
  const auto n = static_cast<Eigen::Index>(hit_cols.size());
  Matrix xh(x.rows(), n);
  Vector lt(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    xh.col(c) = x.col(hit_cols[static_cast<std::size_t>(c)]);
    lt[c] = log_target[hit_cols[static_cast<std::size_t>(c)]];
  }
  const Matrix terms = q.weighted_component_log_pdf(xh);  // K x n
  Vector log_q(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const double top = terms.col(c).maxCoeff();
    log_q[c] = top + std::log((terms.col(c).array() - top).exp().sum());
  }
  const Vector lw = lt - log_q;
  const double block_max = lw.maxCoeff();
  acc.rescale(std::max(acc.shift, block_max));
  const Vector scaled = (lw.array() - acc.shift).exp().matrix();
  acc.w += scaled.sum();
  acc.t += scaled.dot((lw.array() - acc.shift).matrix());
  acc.hits += static_cast<std::size_t>(n);

  const std::size_t k_count = q.size();
  parallel_for(k_count, [&](std::size_t k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const Vector coef = ((terms.row(kk).transpose() - log_q).array().exp() * scaled.array()).matrix();
    const double top = coef.maxCoeff();
    if (!(top > 0.0)) return;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index c = 0; c < n; ++c) {
      if (coef[c] >= kNegligible * top) keep.push_back(c);
    }
    const auto nk = static_cast<Eigen::Index>(keep.size());
    Matrix centered(x.rows(), nk);
    Vector ck(nk);
    const Vector& mean = q.component(k).mean();
    for (Eigen::Index c = 0; c < nk; ++c) {
      centered.col(c) = xh.col(keep[static_cast<std::size_t>(c)]) - mean;
      ck[c] = coef[keep[static_cast<std::size_t>(c)]];
    }
    acc.a[kk] += ck.sum();
    acc.s1.col(kk) += centered * ck;
    const Matrix root = centered * ck.cwiseSqrt().asDiagonal();
    acc.s2[k].selfadjointView<Eigen::Lower>().rankUpdate(root);
  });
}

}  // namespace

void MPMCConfig::validate() const {
  if (n_per_iter < 1) throw Error("mpmc config: n_per_iter must be positive");
  if (max_iters < 1) throw Error("mpmc config: max_iters must be positive");
  if (plateau_window < 1) throw Error("mpmc config: plateau_window must be positive");
  if (!(perplexity_target > 0.0 && perplexity_target <= 1.0)) {
    throw Error("mpmc config: perplexity_target must lie in (0, 1]");
  }
  if (!(weight_floor >= 0.0 && weight_floor < 1.0)) throw Error("mpmc config: weight_floor must lie in [0, 1)");
}

const char* to_string(MPMCTermination reason) {
  switch (reason) {
    case MPMCTermination::perplexity_target:
      return "perplexity_target";
    case MPMCTermination::plateau:
      return "plateau";
    case MPMCTermination::max_iterations:
      return "max_iterations";
    case MPMCTermination::rank_deficient:
      return "rank_deficient";
    case MPMCTermination::target_unreachable:
      return "target_unreachable";
  }
  return "unknown";
}

MPMCStep mpmc_iteration(const GaussianMixture& q, const LogDensity& target, const MPMCConfig& config,
                        const RandomStream& rng, int iteration) {
  config.validate();
  const Eigen::Index m = q.dim();
  const std::size_t n = config.n_per_iter;
  const std::size_t blocks = (n + kSampleBlock - 1) / kSampleBlock;
  Accumulator acc(m, q.size());
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t count = std::min(kSampleBlock, n - b * kSampleBlock);
    accumulate_block(acc, q, sample_block(q, b, count, rng), target);
  }
  if (acc.hits == 0 || !(acc.w > 0.0)) {
    throw TargetUnreachable("target unreachable from mixture: none of " + std::to_string(n) +
                            " samples has positive target density");
  }

  const double entropy = std::log(acc.w) - acc.t / acc.w;
  const double perplexity = std::clamp(std::exp(entropy) / static_cast<double>(n), 0.0, 1.0);

  std::vector<Gaussian> components;
  std::vector<double> weights;
  double min_eigenvalue = kInf;
  for (std::size_t k = 0; k < q.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const double alpha = acc.a[kk] / acc.w;
    if (!(alpha >= config.weight_floor) || !(acc.a[kk] > 0.0)) continue;
    const Vector d = acc.s1.col(kk) / acc.a[kk];
    Matrix cov = acc.s2[k].selfadjointView<Eigen::Lower>();
    cov /= acc.a[kk];
    cov -= d * d.transpose();
    cov = 0.5 * (cov + cov.transpose()).eval();
    const double eig = Eigen::SelfAdjointEigenSolver<Matrix>(cov, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    min_eigenvalue = std::min(min_eigenvalue, eig);
    try {
      components.emplace_back(q.component(k).mean() + d, std::move(cov));
    } catch (const InvalidCovariance& e) {
      throw MixtureRankDeficient("rank-deficient covariance: component " + std::to_string(k) + " at MPMC iteration " +
                                     std::to_string(iteration) + " (" + e.what() + ")",
                                 k, iteration);
    }
    weights.push_back(alpha);
  }
  if (components.empty()) {
    throw TargetUnreachable("target unreachable from mixture: every component weight fell below the floor");
  }
  weights = normalize_weights(std::move(weights));
  MPMCStep step{GaussianMixture(std::move(components), std::move(weights)), perplexity, acc.hits, 0.0, min_eigenvalue};
  step.min_weight = *std::min_element(step.mixture.weights().begin(), step.mixture.weights().end());
  return step;
}

MPMCResult run_mpmc(const GaussianMixture& q0, const LogDensity& target, const MPMCConfig& config,
                    const RandomStream& rng) {
  config.validate();
  MPMCResult out{q0, {}};
  out.trace.reason = MPMCTermination::max_iterations;
  int flat = 0;
  for (int it = 1; it <= config.max_iters; ++it) {
    std::optional<MPMCStep> step;
    try {
      step.emplace(mpmc_iteration(out.mixture, target, config, rng.child(static_cast<std::uint64_t>(it)), it));
    } catch (const MixtureRankDeficient& e) {
      out.trace.reason = MPMCTermination::rank_deficient;
      out.trace.diagnostic = e.what();
      spdlog::warn("{}", e.what());
      return out;
    } catch (const TargetUnreachable& e) {
      if (it == 1) throw;
      out.trace.reason = MPMCTermination::target_unreachable;
      out.trace.diagnostic = e.what();
      return out;
    }
    MPMCRecord rec{it, step->perplexity, step->hits, step->mixture.size(), step->min_weight, step->min_eigenvalue};
    spdlog::debug("mpmc it={} perplexity={} hits={} components={}", it, rec.perplexity, rec.hits, rec.components);
    const bool has_previous = !out.trace.iterations.empty();
    const double previous = has_previous ? out.trace.iterations.back().perplexity : 0.0;
    out.trace.iterations.push_back(rec);
    out.mixture = std::move(step->mixture);
    if (rec.perplexity >= config.perplexity_target) {
      out.trace.reason = MPMCTermination::perplexity_target;
      return out;
    }
    flat = (has_previous && std::abs(rec.perplexity - previous) < config.perplexity_plateau_tol) ? flat + 1 : 0;
    if (flat >= config.plateau_window) {
      out.trace.reason = MPMCTermination::plateau;
      return out;
    }
  }
  return out;
}

}  // namespace abimc
