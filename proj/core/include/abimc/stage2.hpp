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

#ifndef ABIMC_STAGE2_HPP
#define ABIMC_STAGE2_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "abimc/distributions.hpp"
#include "abimc/random.hpp"
#include "abimc/surrogate.hpp"

namespace abimc {

struct MPMCConfig {
  std::size_t n_per_iter = 1'000'000;
  int max_iters = 50;
  double perplexity_plateau_tol = 1e-3;
  int plateau_window = 3;
  double perplexity_target = 0.995;
  double weight_floor = 1e-12;

  void validate() const;
};

enum class MPMCTermination { perplexity_target, plateau, max_iterations, rank_deficient, target_unreachable };

const char* to_string(MPMCTermination reason);

struct MPMCRecord {
  int iteration = 0;
  double perplexity = 0.0;       ///< of the weights drawn from the incoming mixture
  std::size_t hits = 0;
  std::size_t components = 0;    ///< after pruning
  double min_weight = 0.0;
  double min_eigenvalue = 0.0;   ///< smallest covariance eigenvalue over components
};

struct MPMCTrace {
  std::vector<MPMCRecord> iterations;
  MPMCTermination reason = MPMCTermination::max_iterations;
  std::string diagnostic;
};

struct MPMCStep {
  GaussianMixture mixture;
  double perplexity = 0.0;
  std::size_t hits = 0;
  double min_weight = 0.0;
  double min_eigenvalue = 0.0;
};

/// One Rao-Blackwellized population Monte Carlo update. Samples are processed
/// in blocks with running max-rescaled sums, so memory does not grow with N.
/// Throws TargetUnreachable when no sample has positive target density and
/// MixtureRankDeficient when an updated covariance cannot be factorized.
MPMCStep mpmc_iteration(const GaussianMixture& q, const LogDensity& target, const MPMCConfig& config,
                        const RandomStream& rng, int iteration = 1);

struct MPMCResult {
  GaussianMixture mixture;  ///< last valid mixture
  MPMCTrace trace;
};

/// Iterates mpmc_iteration until the normalized perplexity reaches the target,
/// plateaus, or the iteration cap is hit. Rank deficiency ends the run with
/// the last valid mixture. Throws TargetUnreachable only on the first
/// iteration.
MPMCResult run_mpmc(const GaussianMixture& q0, const LogDensity& target, const MPMCConfig& config,
                    const RandomStream& rng);

}  // namespace abimc

#endif  // ABIMC_STAGE2_HPP
