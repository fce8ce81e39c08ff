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

#ifndef ABIMC_STAGE1_HPP
#define ABIMC_STAGE1_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "abimc/distributions.hpp"
#include "abimc/forward_models.hpp"
#include "abimc/optimization.hpp"
#include "abimc/random.hpp"

namespace abimc {

/// A fixed charge with its cached oracle triple.
struct ChargeRecord {
  Vector point;
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
};

/// Points repelling new component centers. Each point carries the oracle
/// triple (f, grad f, hess f) so the surrogate never re-queries the oracle.
class FixedChargeSet {
 public:
  static constexpr double kDuplicateTolerance = 1e-12;

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const ChargeRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<ChargeRecord>& records() const { return records_; }
  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

  /// Index of a stored point within kDuplicateTolerance of x.
  std::optional<std::size_t> find(const Vector& x) const;

  /// Adds x, querying the oracle only if x is not already present.
  std::size_t add(const Vector& x, const ScalarMap& oracle);
  /// Adds a record whose triple is already known; duplicates are ignored.
  std::size_t add(ChargeRecord record);

  /// sum_i 1 / |x - x_i| and its derivatives.
  double potential(const Vector& x) const;
  Vector potential_gradient(const Vector& x) const;
  Matrix potential_hessian(const Vector& x) const;

 private:
  std::vector<ChargeRecord> records_;
};

/// AL settings with a tight inner solve (gradient factor 1e-6, 50 steps).
inline AugmentedLagrangianSettings tight_al_settings() {
  AugmentedLagrangianSettings s;
  s.inner.grad_reduction_factor = 1e-6;
  s.inner.max_iters = 50;
  return s;
}

struct Stage1Config {
  double eps_abs = 1.0 - 1e-3;
  double eps_rel = 1e-3;
  std::size_t beta_grid_size = 5;
  std::size_t kl_sample_size = 10'000;
  std::size_t max_components = 200;
  /// Potential-energy solves inside the continuation.
  AugmentedLagrangianSettings al;
  /// Pseudo-posterior MAP solve for the first component.
  AugmentedLagrangianSettings map = tight_al_settings();
  /// Budget of the start-point search.
  int start_search_iters = 100;

  /// Throws Error when a field is out of range. eps_abs may equal 1 and
  /// eps_rel may equal 0; either setting disables that stopping test.
  void validate() const;
};

enum class Stage1Termination { absolute_tolerance, relative_tolerance, max_components, continuation_failed };

const char* to_string(Stage1Termination reason);

/// One Stage-1 iteration.
struct Stage1Record {
  std::size_t iteration = 0;
  double y = 0.0;
  double beta = 0.0;
  std::size_t beta_index = 0;
  std::size_t betas_tried = 0;
  double kl = 0.0;
  double zeta = 0.0;
  Vector center;
  double sigma_sq = 0.0;
  std::size_t components = 0;
  std::size_t charges = 0;
  OracleCounts counts;  ///< cumulative Stage-1 oracle counts after this iteration
  std::string note;
};

struct Stage1Output {
  GaussianMixture mixture;
  FixedChargeSet charges;
  std::vector<double> zeta_trace;
  std::vector<Stage1Record> log;
  OracleCounts eval_counts;  ///< cumulative over the run and any restarts
  Stage1Termination reason = Stage1Termination::absolute_tolerance;
  Vector x_start;
};

/// Sigma0 - (Sigma0 g)(Sigma0 g)^T / (sigma_sq + g^T Sigma0 g); throws
/// RankDeficientCovariance when the result is not positive definite.
Matrix gauss_newton_covariance(const Vector& grad, const Matrix& sigma0, double sigma_sq);

/// Pieces of the linearized push-forward shared by optimal_sigma_sq and
/// pushforward_kl.
struct Pushforward {
  double s_sq = 0.0;       ///< v^T Sigma0 v
  double f_at_xk = 0.0;
  double f_lin_at_x0 = 0.0;
  TruncatedMoments truncated;
};

Pushforward linearized_pushforward(const Vector& grad, const Matrix& sigma0, double f_at_xk,
                                   double f_lin_at_x0, const TargetInterval& interval);

/// Noise variance minimizing the push-forward KL divergence. Returns
/// 1e6 * v^T Sigma0 v when the minimizer does not exist.
double optimal_sigma_sq(const Vector& grad, const Matrix& sigma0, double f_at_xk, double f_lin_at_x0,
                        const TargetInterval& interval);

/// Push-forward KL divergence as a function of sigma_sq, without the
/// sigma-independent -log(mass) term.
double pushforward_kl(double sigma_sq, const Vector& grad, const Matrix& sigma0, double f_at_xk,
                      double f_lin_at_x0, const TargetInterval& interval);

/// Weights proportional to the overlap of each component with the nominal
/// density. Falls back to uniform weights, with a warning, if every overlap
/// underflows.
std::vector<double> reweight_mixture(const std::vector<Gaussian>& components, const Gaussian& nominal);

/// U(x) - beta log p(x) with analytic gradient and Hessian.
Objective potential_objective(const FixedChargeSet& charges, const Gaussian& nominal, double beta);

/// size log-spaced values on [1e-2, 1e2] * U(probe) / max(|log p(probe)|, 1e-8).
std::vector<double> beta_grid(const FixedChargeSet& charges, const Gaussian& nominal, const Vector& probe,
                              std::size_t size);

struct ContinuationResult {
  GaussianMixture mixture;
  std::vector<ChargeRecord> new_charges;
  double kl = 0.0;
  double beta = 0.0;
  std::size_t beta_index = 0;
  std::size_t betas_tried = 0;
  Vector center;
  double sigma_sq = 0.0;
  std::string note;
};

/// Adds one component to q_prev by beta-continuation of the potential-energy
/// problem constrained to f(x) = y. The beta grid is balanced at a point just
/// off the most recent center.
ContinuationResult continuation(const GaussianMixture& q_prev, const FixedChargeSet& charges, double y,
                                const ForwardProblem& problem, const ScalarMap& oracle, const Stage1Config& config,
                                const RandomStream& rng);

/// Point at distance sqrt(tr(Sigma0)/m) from center in a direction drawn
/// from rng. Used wherever the potential would be singular at center itself.
Vector displaced_probe(const Vector& center, const Gaussian& nominal, const RandomStream& rng);

/// Least-squares descent on (y - f(x))^2 from x0, stopping once |y - f| is
/// within tolerance or after max_iters trust-region steps.
Vector level_set_point(const ScalarMap& oracle, double y, double tolerance, const Vector& x0, int max_iters);

/// Point with f(x) in the target interval, found from the nominal mean.
Vector find_start_point(const ForwardProblem& problem, const ScalarMap& oracle, int max_iters);

/// y* and sigma*^2 for a component linearized at x.
struct ComponentParameters {
  double y = 0.0;
  double sigma_sq = 0.0;
};
ComponentParameters component_parameters(const ForwardProblem& problem, const ScalarMap& oracle,
                                         const Vector& x);

Stage1Output run_stage1(const ForwardProblem& problem, const Stage1Config& config, const RandomStream& rng);

/// Resumes the Stage-1 loop from prev with a new configuration. At least one
/// iteration is run.
Stage1Output warm_restart_stage1(const Stage1Output& prev, const ForwardProblem& problem,
                                 const Stage1Config& config, const RandomStream& rng);

}  // namespace abimc

#endif  // ABIMC_STAGE1_HPP
