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

#include "abimc/serialization.hpp"

#include "abimc/error.hpp"
#include "json_eigen.hpp"

namespace abimc {
namespace {

using detail::json;

json counts_json(const OracleCounts& c) {
  return json{{"value", c.value}, {"gradient", c.gradient}, {"hessian", c.hessian}};
}

OracleCounts counts_from_json(const json& j) {
  return {j.at("value").get<std::uint64_t>(), j.at("gradient").get<std::uint64_t>(),
          j.at("hessian").get<std::uint64_t>()};
}

json record_json(const Stage1Record& r) {
  return json{{"iteration", r.iteration},
              {"y", r.y},
              {"beta", r.beta},
              {"beta_index", r.beta_index},
              {"betas_tried", r.betas_tried},
              {"kl", r.kl},
              {"zeta", r.zeta},
              {"center", detail::vector_to_json(r.center)},
              {"sigma_sq", std::isfinite(r.sigma_sq) ? json(r.sigma_sq) : json(nullptr)},
              {"components", r.components},
              {"charges", r.charges},
              {"eval_counts", counts_json(r.counts)},
              {"note", r.note}};
}

Stage1Record record_from_json(const json& j) {
  Stage1Record r;
  r.iteration = j.at("iteration").get<std::size_t>();
  r.y = j.at("y").get<double>();
  r.beta = j.at("beta").get<double>();
  r.beta_index = j.at("beta_index").get<std::size_t>();
  r.betas_tried = j.at("betas_tried").get<std::size_t>();
  r.kl = j.at("kl").get<double>();
  r.zeta = j.at("zeta").get<double>();
  r.center = detail::vector_from_json(j.at("center"));
  r.sigma_sq = j.at("sigma_sq").is_null() ? std::numeric_limits<double>::infinity() : j.at("sigma_sq").get<double>();
  r.components = j.at("components").get<std::size_t>();
  r.charges = j.at("charges").get<std::size_t>();
  r.counts = counts_from_json(j.at("eval_counts"));
  r.note = j.at("note").get<std::string>();
  return r;
}

Stage1Termination parse_termination(const std::string& s) {
  for (auto r : {Stage1Termination::absolute_tolerance, Stage1Termination::relative_tolerance,
                 Stage1Termination::max_components, Stage1Termination::continuation_failed}) {
    if (s == to_string(r)) return r;
  }
  throw FormatError("checkpoint: unknown termination reason '" + s + "'");
}

template <class Fn>
auto parse_or_throw(const std::string& what, const std::string& text, Fn&& fn) {
  try {
    return fn(json::parse(text));
  } catch (const json::exception& e) {
    throw FormatError(what + ": " + e.what());
  } catch (const DimensionError& e) {
    throw FormatError(what + ": " + e.what());
  } catch (const InvalidCovariance& e) {
    throw FormatError(what + ": " + e.what());
  } catch (const InvalidWeights& e) {
    throw FormatError(what + ": " + e.what());
  }
}

}  // namespace

std::string serialize_mixture(const GaussianMixture& q) {
  json j = detail::mixture_to_json(q);
  j["format_version"] = kCheckpointFormatVersion;
  return j.dump(1) + "\n";
}

GaussianMixture deserialize_mixture(const std::string& text) {
  return parse_or_throw("mixture file", text, [](const json& j) { return detail::mixture_from_json(j); });
}

std::string serialize_stage1(const Stage1Output& out) {
  json charges = json::array();
  for (const auto& c : out.charges) {
    charges.push_back(json{{"point", detail::vector_to_json(c.point)},
                           {"value", c.value},
                           {"gradient", detail::vector_to_json(c.gradient)},
                           {"hessian", detail::matrix_to_json(c.hessian)}});
  }
  json log = json::array();
  for (const auto& r : out.log) log.push_back(record_json(r));
  json j{{"format_version", kCheckpointFormatVersion},
         {"reason", to_string(out.reason)},
         {"x_start", detail::vector_to_json(out.x_start)},
         {"eval_counts", counts_json(out.eval_counts)},
         {"zeta_trace", out.zeta_trace},
         {"mixture", detail::mixture_to_json(out.mixture)},
         {"charges", std::move(charges)},
         {"log", std::move(log)}};
  return j.dump(1) + "\n";
}

Stage1Output deserialize_stage1(const std::string& text) {
  return parse_or_throw("checkpoint", text, [](const json& j) {
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw FormatError("checkpoint: unsupported format_version");
    }
    FixedChargeSet charges;
    for (const auto& c : j.at("charges")) {
      charges.add(ChargeRecord{detail::vector_from_json(c.at("point")), c.at("value").get<double>(),
                               detail::vector_from_json(c.at("gradient")), detail::matrix_from_json(c.at("hessian"))});
    }
    Stage1Output out{detail::mixture_from_json(j.at("mixture")),
                     std::move(charges),
                     j.at("zeta_trace").get<std::vector<double>>(),
                     {},
                     counts_from_json(j.at("eval_counts")),
                     parse_termination(j.at("reason").get<std::string>()),
                     detail::vector_from_json(j.at("x_start"))};
    for (const auto& r : j.at("log")) out.log.push_back(record_from_json(r));
    const Eigen::Index m = out.mixture.dim();
    for (const auto& c : out.charges) {
      if (c.point.size() != m || c.gradient.size() != m || c.hessian.rows() != m || c.hessian.cols() != m) {
        throw FormatError("checkpoint: charge dimensions disagree with the mixture");
      }
    }
    if (out.charges.empty()) throw FormatError("checkpoint: no fixed charges");
    if (out.x_start.size() != m) throw FormatError("checkpoint: x_start dimension disagrees with the mixture");
    if (out.zeta_trace.size() != out.log.size()) throw FormatError("checkpoint: zeta_trace and log lengths differ");
    return out;
  });
}

std::string stage1_record_line(const Stage1Record& rec) { return record_json(rec).dump(); }

std::string mpmc_record_line(const MPMCRecord& rec) {
  return json{{"iteration", rec.iteration},
              {"perplexity", rec.perplexity},
              {"hits", rec.hits},
              {"components", rec.components},
              {"min_weight", rec.min_weight},
              {"min_eigenvalue", rec.min_eigenvalue}}
      .dump();
}

std::string is_result_json(const ISResult& r, int indent) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"mu_hat", r.mu_hat},
              {"e_rms", opt(r.e_rms)},
              {"ess", opt(r.ess)},
              {"ess_normalized", opt(r.ess_normalized)},
              {"chi2_divergence", opt(r.chi2_divergence)},
              {"n", r.n},
              {"hit_count", r.hit_count},
              {"diagnostics_defined", r.diagnostics_defined()},
              {"eval_counts", counts_json(r.eval_counts)}}
      .dump(indent);
}

}  // namespace abimc
