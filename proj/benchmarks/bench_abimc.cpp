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

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "abimc/distributions.hpp"
#include "abimc/forward_models.hpp"
#include "abimc/problem_io.hpp"
#include "abimc/stage1.hpp"
#include "abimc/stage2.hpp"
#include "abimc/surrogate.hpp"

namespace {

using abimc::Gaussian;
using abimc::GaussianMixture;
using abimc::Matrix;
using abimc::RandomStream;
using abimc::Vector;

GaussianMixture random_mixture(Eigen::Index m, std::size_t k) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  std::vector<Gaussian> comps;
  for (std::size_t j = 0; j < k; ++j) {
    Vector mu(m);
    Matrix a(m, m);
    for (Eigen::Index i = 0; i < m; ++i) mu[i] = normal(rng);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
    comps.emplace_back(mu, a * a.transpose() / static_cast<double>(m) + 0.1 * Matrix::Identity(m, m));
  }
  return GaussianMixture(std::move(comps), std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

// Stage-1 output on a quadratic (16, 8) problem; computed once.
struct Quadratic {
  abimc::ForwardProblem problem;
  abimc::Stage1Output stage1;
};

const Quadratic& quadratic() {
  static const Quadratic q = [] {
    auto problem = abimc::instantiate(abimc::polynomial_definition(abimc::MapOrder::quadratic, 16, 8, 1e-3, 1,
                                                                   200'000));
    auto stage1 = abimc::run_stage1(problem, abimc::Stage1Config{}, RandomStream(1));
    return Quadratic{std::move(problem), std::move(stage1)};
  }();
  return q;
}

void BM_MixtureLogPdf(benchmark::State& state) {
  const auto m = static_cast<Eigen::Index>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const GaussianMixture q = random_mixture(m, k);
  const Matrix xs = abimc::sample(q, 4096, RandomStream(3));
  for (auto _ : state) benchmark::DoNotOptimize(q.log_pdf_batch(xs));
  state.SetItemsProcessed(state.iterations() * xs.cols());
}
BENCHMARK(BM_MixtureLogPdf)->Args({2, 10})->Args({16, 20})->Args({64, 20});

void BM_MixtureSample(benchmark::State& state) {
  const GaussianMixture q = random_mixture(static_cast<Eigen::Index>(state.range(0)), 20);
  std::size_t b = 0;
  for (auto _ : state) benchmark::DoNotOptimize(abimc::sample_block(q, b++, 4096, RandomStream(5)));
  state.SetItemsProcessed(state.iterations() * 4096);
}
BENCHMARK(BM_MixtureSample)->Arg(2)->Arg(16)->Arg(64);

void BM_SurrogateBatch(benchmark::State& state) {
  const abimc::TaylorSurrogate sur(quadratic().stage1.charges);
  const Matrix xs = abimc::sample(GaussianMixture(quadratic().problem.nominal()), 4096, RandomStream(7));
  for (auto _ : state) benchmark::DoNotOptimize(sur.evaluate_batch(xs));
  state.SetItemsProcessed(state.iterations() * xs.cols());
  state.counters["charges"] = static_cast<double>(quadratic().stage1.charges.size());
}
BENCHMARK(BM_SurrogateBatch)->Unit(benchmark::kMicrosecond);

void BM_MpmcIteration(benchmark::State& state) {
  const Quadratic& quad = quadratic();
  const abimc::TaylorSurrogate sur(quad.stage1.charges);
  const auto target = abimc::surrogate_target_log_density(sur, quad.problem.nominal(), quad.problem.interval());
  const GaussianMixture& q = quad.stage1.mixture;
  abimc::MPMCConfig config;
  config.n_per_iter = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(abimc::mpmc_iteration(q, target, config, RandomStream(9)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MpmcIteration)->Arg(1 << 14)->Arg(1 << 17)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
