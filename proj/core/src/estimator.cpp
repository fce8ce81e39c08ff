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

#include "abimc/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include "abimc/error.hpp"
#include "abimc/parallel.hpp"

namespace abimc {
namespace {

struct BlockSums {
  double w = 0.0;
  double w2 = 0.0;
  std::size_t hits = 0;
};

ISResult summarize(const std::vector<BlockSums>& blocks, std::size_t n) {
  BlockSums total;
  for (const auto& b : blocks) {
    total.w += b.w;
    total.w2 += b.w2;
    total.hits += b.hits;
  }
  ISResult out;
  out.n = n;
  out.hit_count = total.hits;
  const auto nn = static_cast<double>(n);
  out.mu_hat = total.w / nn;
  if (total.hits == 0 || !(total.w > 0.0)) {
    out.mu_hat = 0.0;
    return out;
  }
  const double ratio = total.w2 / (total.w * total.w);
  const double chi2 = std::max(nn * ratio - 1.0, 0.0);
  out.chi2_divergence = chi2;
  out.e_rms = std::sqrt(chi2 / nn);
  out.ess_normalized = 1.0 / (chi2 + 1.0);
  out.ess = nn / (chi2 + 1.0);
  return out;
}

template <class Weigh>
ISResult weighted_run(const ForwardProblem& problem, const GaussianMixture& q, std::size_t n,
                      const RandomStream& rng, std::vector<double>* weights, Weigh&& weigh) {
  if (n < 1) throw DimensionError("importance sampling: n must be positive");
  const OracleCounts before = problem.counts();
  const std::size_t blocks = (n + kSampleBlock - 1) / kSampleBlock;
  std::vector<BlockSums> sums(blocks);
  if (weights) weights->assign(n, 0.0);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t start = b * kSampleBlock;
    const std::size_t count = std::min(kSampleBlock, n - start);
    const Matrix x = sample_block(q, b, count, rng);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (!problem.interval().contains(problem.value(x.col(j)))) continue;
      const double w = weigh(x.col(j));
      sums[b].w += w;
      sums[b].w2 += w * w;
      ++sums[b].hits;
      if (weights) (*weights)[start + static_cast<std::size_t>(j)] = w;
    }
  });
  ISResult out = summarize(sums, n);
  out.eval_counts = problem.counts() - before;
  return out;
}

template <class Fn>
auto in_phase(Phase phase, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PhaseError&) {
    throw;
  } catch (const std::exception& e) {
    std::throw_with_nested(PhaseError(phase, e.what()));
  }
}

}  // namespace

ISResult summarize_weights(std::span<const double> weights) {
  std::vector<BlockSums> sums((weights.size() + kSampleBlock - 1) / kSampleBlock);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    auto& b = sums[i / kSampleBlock];
    if (weights[i] > 0.0) {
      b.w += weights[i];
      b.w2 += weights[i] * weights[i];
      ++b.hits;
    }
  }
  return summarize(sums, weights.size());
}

double ess_rms_identity(double e_rms, std::size_t n) {
  return 1.0 / (static_cast<double>(n) * e_rms * e_rms + 1.0);
}

ISResult importance_sample(const ForwardProblem& problem, const GaussianMixture& q, std::size_t n,
                           const RandomStream& rng, std::vector<double>* weights) {
  const Gaussian& p = problem.nominal();
  return weighted_run(problem, q, n, rng, weights, [&](const Eigen::Ref<const Vector>& x) {
    return std::exp(p.log_pdf(x) - q.log_pdf(x));
  });
}

ISResult simple_monte_carlo(const ForwardProblem& problem, std::size_t n, const RandomStream& rng,
                            std::vector<double>* weights) {
  const GaussianMixture p(problem.nominal());
  return weighted_run(problem, p, n, rng, weights, [](const Eigen::Ref<const Vector>&) { return 1.0; });
}

GaussianMixture bimc_density(const ForwardProblem& problem, double y, double sigma_sq, const Vector& x_init,
                             const TrustRegionSettings& settings) {
  const ScalarMap oracle = memoize(as_scalar_map(problem));
  const Objective prior = potential_objective(FixedChargeSet{}, problem.nominal(), 1.0);
  const Objective posterior = augmented_lagrangian_objective(prior, oracle, y, 0.0, sigma_sq);
  Vector x_map;
  try {
    x_map = trust_region_minimize(posterior, x_init, settings).x;
    return GaussianMixture(
        Gaussian(x_map, gauss_newton_covariance(oracle.gradient(x_map), problem.nominal().covariance(), sigma_sq)));
  } catch (const Error& e) {
    throw IntractableInverseProblem(std::string("intractable inverse problem: ") + e.what());
  }
}

GaussianMixture bimc_baseline(const ForwardProblem& problem, const TrustRegionSettings& settings) {
  const ScalarMap oracle = memoize(as_scalar_map(problem));
  Vector x_start;
  ComponentParameters params;
  try {
    x_start = find_start_point(problem, oracle, 100);
    params = component_parameters(problem, oracle, x_start);
  } catch (const Error& e) {
    throw IntractableInverseProblem(std::string("intractable inverse problem: ") + e.what());
  }
  return bimc_density(problem, params.y, params.sigma_sq, x_start, settings);
}

RandomStream stage1_stream(const RandomStream& rng) { return rng.child(1); }
RandomStream stage2_stream(const RandomStream& rng) { return rng.child(2); }
RandomStream estimation_stream(const RandomStream& rng) { return rng.child(3); }

MPMCResult refine_mixture(const ForwardProblem& problem, const Stage1Output& stage1, const MPMCConfig& config,
                          const RandomStream& rng) {
  const TaylorSurrogate surrogate(stage1.charges);
  return run_mpmc(stage1.mixture, surrogate_target_log_density(surrogate, problem.nominal(), problem.interval()),
                  config, rng);
}

ABIMCRun run_abimc(const ForwardProblem& problem, const ABIMCConfig& config, const RandomStream& rng,
                   std::vector<double>* weights) {
  Stage1Output stage1 = in_phase(Phase::stage1, [&] { return run_stage1(problem, config.stage1, stage1_stream(rng)); });
  const OracleCounts before_stage2 = problem.counts();
  MPMCResult stage2 = in_phase(Phase::stage2, [&] { return refine_mixture(problem, stage1, config.mpmc, stage2_stream(rng)); });
  ABIMCRun run{std::move(stage1), std::move(stage2), std::nullopt, {}};
  run.counts.stage1 = run.stage1.eval_counts;
  run.counts.stage2 = problem.counts() - before_stage2;
  if (run.stage2.trace.reason == MPMCTermination::rank_deficient) return run;
  run.result = in_phase(Phase::estimation, [&] {
    return importance_sample(problem, run.stage2.mixture, config.n_samples, estimation_stream(rng), weights);
  });
  run.counts.estimation = run.result->eval_counts;
  return run;
}

}  // namespace abimc
