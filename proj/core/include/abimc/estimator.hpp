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

#ifndef ABIMC_ESTIMATOR_HPP
#define ABIMC_ESTIMATOR_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "abimc/distributions.hpp"
#include "abimc/forward_models.hpp"
#include "abimc/optimization.hpp"
#include "abimc/random.hpp"
#include "abimc/stage1.hpp"
#include "abimc/stage2.hpp"

namespace abimc {

/// Importance-sampling estimate with weight diagnostics. e_rms, ess,
/// ess_normalized and chi2_divergence are empty when no sample hit.
struct ISResult {
  double mu_hat = 0.0;
  std::optional<double> e_rms;
  std::optional<double> ess;
  std::optional<double> ess_normalized;
  std::optional<double> chi2_divergence;
  std::size_t n = 0;
  std::size_t hit_count = 0;
  OracleCounts eval_counts;

  bool diagnostics_defined() const { return e_rms.has_value(); }
};

/// Estimate and diagnostics from raw weights (zero for misses).
ISResult summarize_weights(std::span<const double> weights);

/// 1 / (n e_rms^2 + 1).
double ess_rms_identity(double e_rms, std::size_t n);

/// Draws n samples from q and weights them with the counted true map. When
/// weights is non-null it receives all n weights in sample order.
ISResult importance_sample(const ForwardProblem& problem, const GaussianMixture& q, std::size_t n,
                           const RandomStream& rng, std::vector<double>* weights = nullptr);

/// Plain Monte Carlo under the nominal density.
ISResult simple_monte_carlo(const ForwardProblem& problem, std::size_t n, const RandomStream& rng,
                            std::vector<double>* weights = nullptr);

/// Trust-region settings for a MAP search run to convergence (gradient
/// factor 1e-8, 200 steps).
inline TrustRegionSettings map_search_settings() {
  TrustRegionSettings s;
  s.grad_reduction_factor = 1e-8;
  s.max_iters = 200;
  return s;
}

/// Single-Gaussian density built from the pseudo-posterior for data y and
/// noise variance sigma_sq, with the MAP point found from x_init. Throws
/// IntractableInverseProblem when the MAP search fails.
GaussianMixture bimc_density(const ForwardProblem& problem, double y, double sigma_sq, const Vector& x_init,
                             const TrustRegionSettings& settings = map_search_settings());

/// Baseline single-Gaussian density: start point, y and sigma^2 chosen as for
/// the first adaptive component, then the pseudo-posterior MAP.
GaussianMixture bimc_baseline(const ForwardProblem& problem,
                              const TrustRegionSettings& settings = map_search_settings());

struct PhaseCounts {
  OracleCounts stage1;
  OracleCounts stage2;
  OracleCounts estimation;
};

struct ABIMCConfig {
  Stage1Config stage1;
  MPMCConfig mpmc;
  std::size_t n_samples = 10'000;
};

struct ABIMCRun {
  Stage1Output stage1;
  MPMCResult stage2;
  /// Empty when refinement ended on a rank-deficient covariance.
  std::optional<ISResult> result;
  PhaseCounts counts;
};

/// Random streams used by each phase of an adaptive run.
RandomStream stage1_stream(const RandomStream& rng);
RandomStream stage2_stream(const RandomStream& rng);
RandomStream estimation_stream(const RandomStream& rng);

/// Stage-2 refinement of a Stage-1 mixture against the surrogate target.
MPMCResult refine_mixture(const ForwardProblem& problem, const Stage1Output& stage1, const MPMCConfig& config,
                          const RandomStream& rng);

/// Stage 1, Stage 2 and the final importance-sampling estimate. Failures are
/// rethrown as PhaseError with the original exception nested.
ABIMCRun run_abimc(const ForwardProblem& problem, const ABIMCConfig& config, const RandomStream& rng,
                   std::vector<double>* weights = nullptr);

}  // namespace abimc

#endif  // ABIMC_ESTIMATOR_HPP
