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

#include "output.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <sstream>

#include <fmt/format.h>

#include "abimc/problem_io.hpp"
#include "abimc/serialization.hpp"

namespace abimc::cli {
namespace {

json tr_to_json(const TrustRegionSettings& s) {
  return json{{"grad_reduction_factor", s.grad_reduction_factor},
              {"max_iters", s.max_iters},
              {"initial_radius", s.initial_radius},
              {"max_radius", s.max_radius}};
}

void tr_from_json(const json& j, TrustRegionSettings& s) {
  s.grad_reduction_factor = j.value("grad_reduction_factor", s.grad_reduction_factor);
  s.max_iters = j.value("max_iters", s.max_iters);
  s.initial_radius = j.value("initial_radius", s.initial_radius);
  s.max_radius = j.value("max_radius", s.max_radius);
}

json al_to_json(const AugmentedLagrangianSettings& s) {
  return json{{"lambda0", s.lambda0}, {"delta0", s.delta0}, {"max_outer", s.max_outer}, {"inner", tr_to_json(s.inner)}};
}

void al_from_json(const json& j, AugmentedLagrangianSettings& s) {
  s.lambda0 = j.value("lambda0", s.lambda0);
  s.delta0 = j.value("delta0", s.delta0);
  s.max_outer = j.value("max_outer", s.max_outer);
  if (j.contains("inner")) tr_from_json(j.at("inner"), s.inner);
}

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{:.17g}", *v) : "nan"; }

}  // namespace

json config_to_json(const ABIMCConfig& c) {
  const Stage1Config& s = c.stage1;
  const MPMCConfig& m = c.mpmc;
  return json{{"stage1",
               {{"eps_abs", s.eps_abs},
                {"eps_rel", s.eps_rel},
                {"beta_grid_size", s.beta_grid_size},
                {"kl_sample_size", s.kl_sample_size},
                {"max_components", s.max_components},
                {"start_search_iters", s.start_search_iters},
                {"al", al_to_json(s.al)},
                {"map", al_to_json(s.map)}}},
              {"mpmc",
               {{"n_per_iter", m.n_per_iter},
                {"max_iters", m.max_iters},
                {"perplexity_target", m.perplexity_target},
                {"perplexity_plateau_tol", m.perplexity_plateau_tol},
                {"plateau_window", m.plateau_window},
                {"weight_floor", m.weight_floor}}},
              {"n_samples", c.n_samples}};
}

void config_from_json(const json& j, ABIMCConfig& c) {
  if (j.contains("stage1")) {
    const json& s = j.at("stage1");
    c.stage1.eps_abs = s.value("eps_abs", c.stage1.eps_abs);
    c.stage1.eps_rel = s.value("eps_rel", c.stage1.eps_rel);
    c.stage1.beta_grid_size = s.value("beta_grid_size", c.stage1.beta_grid_size);
    c.stage1.kl_sample_size = s.value("kl_sample_size", c.stage1.kl_sample_size);
    c.stage1.max_components = s.value("max_components", c.stage1.max_components);
    c.stage1.start_search_iters = s.value("start_search_iters", c.stage1.start_search_iters);
    if (s.contains("al")) al_from_json(s.at("al"), c.stage1.al);
    if (s.contains("map")) al_from_json(s.at("map"), c.stage1.map);
  }
  if (j.contains("mpmc")) {
    const json& m = j.at("mpmc");
    c.mpmc.n_per_iter = m.value("n_per_iter", c.mpmc.n_per_iter);
    c.mpmc.max_iters = m.value("max_iters", c.mpmc.max_iters);
    c.mpmc.perplexity_target = m.value("perplexity_target", c.mpmc.perplexity_target);
    c.mpmc.perplexity_plateau_tol = m.value("perplexity_plateau_tol", c.mpmc.perplexity_plateau_tol);
    c.mpmc.plateau_window = m.value("plateau_window", c.mpmc.plateau_window);
    c.mpmc.weight_floor = m.value("weight_floor", c.mpmc.weight_floor);
  }
  c.n_samples = j.value("n_samples", c.n_samples);
}

json counts_to_json(const OracleCounts& c) {
  return json{{"value", c.value}, {"gradient", c.gradient}, {"hessian", c.hessian}};
}

json phase_counts_to_json(const PhaseCounts& c) {
  return json{{"stage1", counts_to_json(c.stage1)},
              {"stage2", counts_to_json(c.stage2)},
              {"estimation", counts_to_json(c.estimation)}};
}

json result_to_json(const std::optional<ISResult>& r) {
  return r ? json::parse(is_result_json(*r)) : json(nullptr);
}

std::string convergence_table(const std::vector<double>& weights) {
  std::ostringstream out;
  out << "n\tmu_hat\te_rms\tess_normalized\thit_count\n";
  std::vector<std::size_t> sizes;
  for (std::size_t n = 16; n < weights.size(); n *= 2) sizes.push_back(n);
  if (!weights.empty()) sizes.push_back(weights.size());
  for (std::size_t n : sizes) {
    const ISResult r = summarize_weights(std::span<const double>(weights.data(), n));
    out << n << '\t' << fmt::format("{:.17g}", r.mu_hat) << '\t' << cell(r.e_rms) << '\t' << cell(r.ess_normalized)
        << '\t' << r.hit_count << '\n';
  }
  return out.str();
}

RunDirectory::RunDirectory(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

void RunDirectory::write(const std::string& name, const std::string& text) {
  write_text_file(dir_ / name, text);
  checksums_[name] = sha256_hex(text);
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace abimc::cli
