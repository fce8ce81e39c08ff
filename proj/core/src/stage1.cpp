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

#include "abimc/stage1.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <Eigen/Cholesky>
#include <spdlog/spdlog.h>

#include "abimc/error.hpp"

namespace abimc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFallbackScale = 1e6;

// -beta log p(x) with derivatives; precision matrix computed once.
struct NominalTerm {
  NominalTerm(const Gaussian& nominal, double beta)
      : p(nominal), beta(beta), precision(nominal.covariance().llt().solve(Matrix::Identity(nominal.dim(), nominal.dim()))) {
    precision = 0.5 * (precision + precision.transpose()).eval();
  }
  double value(const Vector& x) const { return -beta * p.log_pdf(x); }
  Vector gradient(const Vector& x) const { return beta * (precision * (x - p.mean())); }
  Matrix hessian() const { return beta * precision; }

  Gaussian p;
  double beta;
  Matrix precision;
};

Objective nominal_objective(const Gaussian& nominal, double beta) {
  auto term = std::make_shared<const NominalTerm>(nominal, beta);
  return {[term](const Vector& x) { return term->value(x); },
          [term](const Vector& x) { return term->gradient(x); },
          [term](const Vector&) { return term->hessian(); }};
}

double log_sum_exp(const Vector& v) {
  const double top = v.maxCoeff();
  if (top == -kInf) return -kInf;
  return top + std::log((v.array() - top).exp().sum());
}

Gaussian make_component(const ForwardProblem& problem, const ScalarMap& oracle, const Vector& x,
                        double* sigma_sq_out) {
  const Matrix& sigma0 = problem.nominal().covariance();
  const Vector g = oracle.gradient(x);
  const double fk = oracle.value(x);
  const double s_sq = g.dot(sigma0 * g);
  if (!(s_sq > 0.0)) {
    *sigma_sq_out = kInf;
    return Gaussian(x, sigma0);
  }
  const double f_lin0 = fk + g.dot(problem.nominal().mean() - x);
  const double sigma_sq = optimal_sigma_sq(g, sigma0, fk, f_lin0, problem.interval());
  *sigma_sq_out = sigma_sq;
  return Gaussian(x, gauss_newton_covariance(g, sigma0, sigma_sq));
}

struct Candidate {
  GaussianMixture mixture;
  double kl;
  double beta;
  std::size_t index;
  Vector center;
  double sigma_sq;
};

}  // namespace

std::optional<std::size_t> FixedChargeSet::find(const Vector& x) const {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& p = records_[i].point;
    if (p.size() == x.size() && (p - x).norm() <= kDuplicateTolerance * std::max(1.0, p.norm())) return i;
  }
  return std::nullopt;
}

std::size_t FixedChargeSet::add(const Vector& x, const ScalarMap& oracle) {
  if (auto hit = find(x)) return *hit;
  records_.push_back({x, oracle.value(x), oracle.gradient(x), oracle.hessian(x)});
  return records_.size() - 1;
}

std::size_t FixedChargeSet::add(ChargeRecord record) {
  if (auto hit = find(record.point)) return *hit;
  records_.push_back(std::move(record));
  return records_.size() - 1;
}

double FixedChargeSet::potential(const Vector& x) const {
  double u = 0.0;
  for (const auto& r : records_) u += 1.0 / (x - r.point).norm();
  return u;
}

Vector FixedChargeSet::potential_gradient(const Vector& x) const {
  Vector g = Vector::Zero(x.size());
  for (const auto& r : records_) {
    const Vector d = x - r.point;
    const double dist = d.norm();
    g -= d / (dist * dist * dist);
  }
  return g;
}

Matrix FixedChargeSet::potential_hessian(const Vector& x) const {
  const Eigen::Index m = x.size();
  Matrix h = Matrix::Zero(m, m);
  for (const auto& r : records_) {
    const Vector d = x - r.point;
    const double dist2 = d.squaredNorm();
    const double dist = std::sqrt(dist2);
    const double inv3 = 1.0 / (dist2 * dist);
    h.noalias() += (3.0 * inv3 / dist2) * (d * d.transpose());
    h.diagonal().array() -= inv3;
  }
  return h;
}

void Stage1Config::validate() const {
  if (!(eps_abs > 0.0 && eps_abs <= 1.0)) throw Error("stage1 config: eps_abs must lie in (0, 1]");
  if (!(eps_rel >= 0.0 && eps_rel < 1.0)) throw Error("stage1 config: eps_rel must lie in [0, 1)");
  if (beta_grid_size < 2) throw Error("stage1 config: beta_grid_size must be at least 2");
  if (kl_sample_size < 1) throw Error("stage1 config: kl_sample_size must be positive");
  if (max_components < 1) throw Error("stage1 config: max_components must be positive");
}

const char* to_string(Stage1Termination reason) {
  switch (reason) {
    case Stage1Termination::absolute_tolerance:
      return "absolute_tolerance";
    case Stage1Termination::relative_tolerance:
      return "relative_tolerance";
    case Stage1Termination::max_components:
      return "max_components";
    case Stage1Termination::continuation_failed:
      return "continuation_failed";
  }
  return "unknown";
}

Matrix gauss_newton_covariance(const Vector& grad, const Matrix& sigma0, double sigma_sq) {
  if (!(sigma_sq > 0.0)) throw InvalidCovariance("gauss_newton_covariance: sigma_sq must be positive");
  if (grad.size() != sigma0.rows()) throw DimensionError("gauss_newton_covariance: dimension mismatch");
  const Vector u = sigma0 * grad;
  const double denom = sigma_sq + grad.dot(u);
  Matrix out = sigma0 - (u * u.transpose()) / denom;
  out = 0.5 * (out + out.transpose()).eval();
  Eigen::LLT<Matrix> llt(out);
  if (llt.info() != Eigen::Success) {
    throw RankDeficientCovariance("gauss_newton_covariance: result is not positive definite");
  }
  return out;
}

Pushforward linearized_pushforward(const Vector& grad, const Matrix& sigma0, double f_at_xk,
                                   double f_lin_at_x0, const TargetInterval& interval) {
  Pushforward pf;
  pf.s_sq = grad.dot(sigma0 * grad);
  if (!(pf.s_sq > 0.0)) throw InvalidCovariance("push-forward variance must be positive");
  pf.f_at_xk = f_at_xk;
  pf.f_lin_at_x0 = f_lin_at_x0;
  pf.truncated = truncated_moments(f_lin_at_x0, pf.s_sq, interval.lo, interval.hi);
  return pf;
}

double optimal_sigma_sq(const Vector& grad, const Matrix& sigma0, double f_at_xk, double f_lin_at_x0,
                        const TargetInterval& interval) {
  const Pushforward pf = linearized_pushforward(grad, sigma0, f_at_xk, f_lin_at_x0, interval);
  const double shift = pf.truncated.mean - f_at_xk;
  const double d_sq = pf.truncated.variance + shift * shift;
  const double denom = pf.s_sq - d_sq;
  if (!(denom > 0.0)) return kFallbackScale * pf.s_sq;
  return pf.s_sq * d_sq / denom;
}

double pushforward_kl(double sigma_sq, const Vector& grad, const Matrix& sigma0, double f_at_xk,
                      double f_lin_at_x0, const TargetInterval& interval) {
  const Pushforward pf = linearized_pushforward(grad, sigma0, f_at_xk, f_lin_at_x0, interval);
  const double rho_sq = sigma_sq / (sigma_sq + pf.s_sq);
  const double nu = pf.truncated.mean;
  return 0.5 * std::log(rho_sq) + pf.truncated.variance / (2.0 * sigma_sq) +
         (nu - f_at_xk) * (nu - f_at_xk) / (2.0 * rho_sq * pf.s_sq) -
         (nu - f_lin_at_x0) * (nu - f_lin_at_x0) / (2.0 * pf.s_sq);
}

std::vector<double> reweight_mixture(const std::vector<Gaussian>& components, const Gaussian& nominal) {
  if (components.empty()) throw InvalidWeights("reweight_mixture: no components");
  Vector log_overlap(static_cast<Eigen::Index>(components.size()));
  for (std::size_t i = 0; i < components.size(); ++i) {
    log_overlap[static_cast<Eigen::Index>(i)] = log_gaussian_overlap(components[i], nominal);
  }
  const double top = log_overlap.maxCoeff();
  std::vector<double> w(components.size());
  if (!std::isfinite(top)) {
    spdlog::warn("reweight_mixture: all overlaps with the nominal density underflow; using uniform weights");
    std::fill(w.begin(), w.end(), 1.0);
  } else {
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = std::max(std::exp(log_overlap[static_cast<Eigen::Index>(i)] - top),
                      std::numeric_limits<double>::min());
    }
  }
  return normalize_weights(std::move(w));
}

Objective potential_objective(const FixedChargeSet& charges, const Gaussian& nominal, double beta) {
  auto set = std::make_shared<const FixedChargeSet>(charges);
  auto term = std::make_shared<const NominalTerm>(nominal, beta);
  return {[set, term](const Vector& x) { return set->potential(x) + term->value(x); },
          [set, term](const Vector& x) { return Vector(set->potential_gradient(x) + term->gradient(x)); },
          [set, term](const Vector& x) { return Matrix(set->potential_hessian(x) + term->hessian()); }};
}

std::vector<double> beta_grid(const FixedChargeSet& charges, const Gaussian& nominal, const Vector& probe,
                              std::size_t size) {
  if (size < 2) throw Error("beta_grid: size must be at least 2");
  const double balance = charges.potential(probe) / std::max(std::abs(nominal.log_pdf(probe)), 1e-8);
  std::vector<double> grid(size);
  for (std::size_t j = 0; j < size; ++j) {
    const double exponent = -2.0 + 4.0 * static_cast<double>(j) / static_cast<double>(size - 1);
    grid[j] = balance * std::pow(10.0, exponent);
  }
  return grid;
}

Vector displaced_probe(const Vector& center, const Gaussian& nominal, const RandomStream& rng) {
  const Eigen::Index m = nominal.dim();
  auto engine = rng.engine();
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector direction(m);
  for (Eigen::Index i = 0; i < m; ++i) direction[i] = normal(engine);
  direction.normalize();
  return center + std::sqrt(nominal.covariance().trace() / static_cast<double>(m)) * direction;
}

Vector level_set_point(const ScalarMap& oracle, double y, double tolerance, const Vector& x0, int max_iters) {
  Objective misfit;
  misfit.value = [&](const Vector& x) {
    const double r = y - oracle.value(x);
    return r * r;
  };
  misfit.gradient = [&](const Vector& x) { return Vector(-2.0 * (y - oracle.value(x)) * oracle.gradient(x)); };
  misfit.hessian = [&](const Vector& x) {
    const Vector g = oracle.gradient(x);
    return Matrix(2.0 * (g * g.transpose()) - 2.0 * (y - oracle.value(x)) * oracle.hessian(x));
  };
  TrustRegionSettings settings;
  settings.grad_reduction_factor = 1e-12;
  settings.max_iters = max_iters;
  settings.stop_when = [tolerance](const Vector&, double value) { return value <= tolerance * tolerance; };
  return trust_region_minimize(misfit, x0, settings).x;
}

ContinuationResult continuation(const GaussianMixture& q_prev, const FixedChargeSet& charges, double y,
                                const ForwardProblem& problem, const ScalarMap& oracle, const Stage1Config& config,
                                const RandomStream& rng) {
  const Gaussian& nominal = problem.nominal();

  // Probe and first warm start sit just off the most recent center, which is
  // itself a charge.
  Vector x_warm = displaced_probe(q_prev.component(q_prev.size() - 1).mean(), nominal, rng.child(0));
  const std::vector<double> betas = beta_grid(charges, nominal, x_warm, config.beta_grid_size);

  const auto k_prev = static_cast<Eigen::Index>(q_prev.size());
  const auto n = static_cast<Eigen::Index>(config.kl_sample_size);

  ContinuationResult out{q_prev, {}, 0.0, 0.0, 0, 0, Vector(), 0.0, {}};
  std::optional<Candidate> best;
  double previous_kl = -kInf;
  for (std::size_t j = 0; j < betas.size(); ++j) {
    out.betas_tried = j + 1;
    Vector x_new;
    std::optional<Gaussian> component;
    double sigma_sq = 0.0;
    try {
      const Objective base = potential_objective(charges, nominal, betas[j]);
      try {
        x_new = augmented_lagrangian_solve(base, oracle, y, problem.interval(), x_warm, config.al).x;
      } catch (const ConstraintUnreachable&) {
        // Charges can wall off the warm start from the level set, which in
        // one dimension is a single point. Retry once from the level set.
        if (best) throw;
        const double tolerance = 1e-3 * problem.interval().width();
        const Vector x_level = level_set_point(oracle, y, tolerance, x_warm, config.start_search_iters);
        x_new = augmented_lagrangian_solve(base, oracle, y, problem.interval(), x_level, config.al).x;
        out.note = "beta 0 restarted from the level set";
      }
      component.emplace(make_component(problem, oracle, x_new, &sigma_sq));
    } catch (const Error& e) {
      if (!best) throw;
      out.note += (out.note.empty() ? "" : "; ") + ("beta " + std::to_string(j) + " failed: " + e.what());
      break;
    }
    x_warm = x_new;
    const bool seen = charges.find(x_new).has_value() ||
                      std::any_of(out.new_charges.begin(), out.new_charges.end(),
                                  [&](const ChargeRecord& r) { return (r.point - x_new).norm() <= 1e-12 * std::max(1.0, r.point.norm()); });
    if (!seen) {
      out.new_charges.push_back({x_new, oracle.value(x_new), oracle.gradient(x_new), oracle.hessian(x_new)});
    }

    std::vector<Gaussian> comps = q_prev.components();
    comps.push_back(*component);
    std::vector<double> weights = reweight_mixture(comps, nominal);

    // Fresh samples for every prospective mixture.
    const Matrix samples = sample(q_prev, config.kl_sample_size, rng.child(1).child(j));
    const Vector log_prev = q_prev.log_pdf_batch(samples);
    Matrix component_log_pdf(k_prev + 1, n);
    for (Eigen::Index k = 0; k < k_prev; ++k) {
      component_log_pdf.row(k) = q_prev.component(static_cast<std::size_t>(k)).log_pdf_batch(samples).transpose();
    }
    component_log_pdf.row(k_prev) = component->log_pdf_batch(samples).transpose();
    Vector log_w(k_prev + 1);
    for (Eigen::Index k = 0; k <= k_prev; ++k) log_w[k] = std::log(weights[static_cast<std::size_t>(k)]);
    double kl_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) kl_sum += log_prev[i] - log_sum_exp(component_log_pdf.col(i) + log_w);
    const double kl = kl_sum / static_cast<double>(n);
    spdlog::debug("continuation: beta {} = {:.6g}, kl {:.6g}, weight {:.3g}", j, betas[j], kl, weights.back());
    if (!(kl > previous_kl)) break;
    previous_kl = kl;
    best.emplace(Candidate{GaussianMixture(std::move(comps), std::move(weights)), kl, betas[j], j, x_new, sigma_sq});
  }
  out.mixture = best->mixture;
  out.kl = best->kl;
  out.beta = best->beta;
  out.beta_index = best->index;
  out.center = best->center;
  out.sigma_sq = best->sigma_sq;
  return out;
}

Vector find_start_point(const ForwardProblem& problem, const ScalarMap& oracle, int max_iters) {
  const TargetInterval& interval = problem.interval();
  const Vector x0 = problem.nominal().mean();
  if (interval.contains(oracle.value(x0))) return x0;
  const Vector x = level_set_point(oracle, interval.midpoint(), 0.5 * interval.width(), x0, max_iters);
  if (!interval.contains(oracle.value(x))) {
    throw ConstraintUnreachable("start point search failed: no point with f in [" + std::to_string(interval.lo) +
                                ", " + std::to_string(interval.hi) + "] within " + std::to_string(max_iters) +
                                " iterations");
  }
  return x;
}

ComponentParameters component_parameters(const ForwardProblem& problem, const ScalarMap& oracle,
                                         const Vector& x) {
  const Matrix& sigma0 = problem.nominal().covariance();
  const Vector g = oracle.gradient(x);
  const double fk = oracle.value(x);
  const double f_lin0 = fk + g.dot(problem.nominal().mean() - x);
  if (!(g.dot(sigma0 * g) > 0.0)) return {problem.interval().midpoint(), 1.0};
  const Pushforward pf = linearized_pushforward(g, sigma0, fk, f_lin0, problem.interval());
  return {pf.truncated.mean, optimal_sigma_sq(g, sigma0, fk, f_lin0, problem.interval())};
}

namespace {

void stage1_loop(Stage1Output& state, const ForwardProblem& problem, const ScalarMap& oracle,
                 const Stage1Config& config, const RandomStream& rng, const OracleCounts& base_counts,
                 const OracleCounts& start_counts) {
  const TargetInterval& interval = problem.interval();
  while (true) {
    if (state.mixture.size() >= config.max_components) {
      state.reason = Stage1Termination::max_components;
      return;
    }
    const std::size_t k = state.mixture.size() + 1;
    const RandomStream it_rng = rng.child(k);
    auto engine = it_rng.child(0).engine();
    std::uniform_real_distribution<double> uniform(interval.lo, interval.hi);
    const double y = uniform(engine);

    ContinuationResult cont = [&] {
      try {
        return continuation(state.mixture, state.charges, y, problem, oracle, config, it_rng.child(1));
      } catch (const ConstraintUnreachable& e) {
        throw ConstraintUnreachable("stage1 iteration " + std::to_string(k) + ": " + e.what());
      }
    }();
    for (auto& record : cont.new_charges) state.charges.add(std::move(record));

    Stage1Record rec;
    rec.iteration = k;
    rec.y = y;
    rec.beta = cont.beta;
    rec.beta_index = cont.beta_index;
    rec.betas_tried = cont.betas_tried;
    rec.kl = cont.kl;
    rec.zeta = cont.kl < 0.0 ? 1.0 : std::exp(-cont.kl);
    if (cont.kl < 0.0) rec.note = "negative KL estimate, zeta clamped to 1";
    if (!cont.note.empty()) rec.note += (rec.note.empty() ? "" : "; ") + cont.note;
    rec.center = cont.center;
    rec.sigma_sq = cont.sigma_sq;
    state.mixture = std::move(cont.mixture);
    rec.components = state.mixture.size();
    rec.charges = state.charges.size();
    rec.counts = base_counts + (problem.counts() - start_counts);
    state.eval_counts = rec.counts;

    const bool has_previous = !state.zeta_trace.empty();
    const double previous = has_previous ? state.zeta_trace.back() : 0.0;
    state.zeta_trace.push_back(rec.zeta);
    state.log.push_back(rec);
    spdlog::debug("stage1 k={} beta={} zeta={} components={}", k, rec.beta, rec.zeta, rec.components);

    if (rec.zeta > config.eps_abs) {
      state.reason = Stage1Termination::absolute_tolerance;
      return;
    }
    if (has_previous && std::abs(rec.zeta - previous) / rec.zeta < config.eps_rel) {
      state.reason = Stage1Termination::relative_tolerance;
      return;
    }
  }
}

}  // namespace

Stage1Output run_stage1(const ForwardProblem& problem, const Stage1Config& config, const RandomStream& rng) {
  config.validate();
  const OracleCounts start_counts = problem.counts();
  const ScalarMap oracle = memoize(as_scalar_map(problem));

  const Vector x_start = find_start_point(problem, oracle, config.start_search_iters);
  const ComponentParameters params = component_parameters(problem, oracle, x_start);
  AugmentedLagrangianSettings map_settings = config.map;
  map_settings.lambda0 = 0.0;
  map_settings.delta0 = params.sigma_sq;
  const ALResult map = augmented_lagrangian_solve(nominal_objective(problem.nominal(), 1.0), oracle, params.y,
                                                  problem.interval(), x_start, map_settings);

  FixedChargeSet charges;
  charges.add(map.x, oracle);
  const Matrix sigma_map = gauss_newton_covariance(charges[0].gradient, problem.nominal().covariance(),
                                                   params.sigma_sq);
  Stage1Output state{GaussianMixture(Gaussian(map.x, sigma_map)), std::move(charges), {}, {}, {},
                     Stage1Termination::absolute_tolerance, x_start};
  state.eval_counts = problem.counts() - start_counts;
  stage1_loop(state, problem, oracle, config, rng, OracleCounts{}, start_counts);
  return state;
}

Stage1Output warm_restart_stage1(const Stage1Output& prev, const ForwardProblem& problem,
                                 const Stage1Config& config, const RandomStream& rng) {
  config.validate();
  const OracleCounts start_counts = problem.counts();
  const ScalarMap oracle = memoize(as_scalar_map(problem));
  Stage1Output state = prev;
  stage1_loop(state, problem, oracle, config, rng, prev.eval_counts, start_counts);
  return state;
}

}  // namespace abimc
