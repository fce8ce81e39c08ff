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

#include <gtest/gtest.h>

#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "abimc/error.hpp"
#include "abimc/serialization.hpp"

namespace abimc {
namespace {

const Stage1Output& toy_stage1() {
  static const Stage1Output out = [] {
    const ForwardProblem problem = toy_problem();
    return run_stage1(problem, Stage1Config{}, RandomStream(5));
  }();
  return out;
}

TEST(MixtureIO, RoundTripIsBitExact) {
  const GaussianMixture& q = toy_stage1().mixture;
  const std::string text = serialize_mixture(q);
  const GaussianMixture back = deserialize_mixture(text);
  ASSERT_EQ(back.size(), q.size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    EXPECT_EQ(back.weight(k), q.weight(k));
    EXPECT_EQ(back.component(k).mean(), q.component(k).mean());
    EXPECT_EQ(back.component(k).covariance(), q.component(k).covariance());
  }
  EXPECT_EQ(serialize_mixture(back), text);
}

TEST(MixtureIO, RejectsBadDocuments) {
  EXPECT_THROW(deserialize_mixture("[1, 2"), FormatError);
  EXPECT_THROW(deserialize_mixture("{}"), FormatError);
  auto j = nlohmann::json::parse(serialize_mixture(toy_stage1().mixture));
  j["weights"][0] = -1.0;
  EXPECT_THROW(deserialize_mixture(j.dump()), FormatError);
}

TEST(Stage1IO, RoundTrip) {
  const Stage1Output& out = toy_stage1();
  const std::string text = serialize_stage1(out);
  const Stage1Output back = deserialize_stage1(text);
  EXPECT_EQ(back.zeta_trace, out.zeta_trace);
  EXPECT_EQ(back.eval_counts, out.eval_counts);
  EXPECT_EQ(back.reason, out.reason);
  EXPECT_EQ(back.x_start, out.x_start);
  ASSERT_EQ(back.charges.size(), out.charges.size());
  for (std::size_t i = 0; i < out.charges.size(); ++i) {
    EXPECT_EQ(back.charges[i].point, out.charges[i].point);
    EXPECT_EQ(back.charges[i].value, out.charges[i].value);
    EXPECT_EQ(back.charges[i].gradient, out.charges[i].gradient);
    EXPECT_EQ(back.charges[i].hessian, out.charges[i].hessian);
  }
  ASSERT_EQ(back.log.size(), out.log.size());
  EXPECT_EQ(back.log.back().center, out.log.back().center);
  EXPECT_EQ(back.log.back().counts, out.log.back().counts);
  EXPECT_EQ(serialize_stage1(back), text);
}

TEST(Stage1IO, RestartFromCheckpointMatchesInMemory) {
  const ForwardProblem a = toy_problem();
  const ForwardProblem b = toy_problem();
  Stage1Config tighter;
  tighter.eps_abs = 1.0 - 1e-4;
  const Stage1Output direct = warm_restart_stage1(toy_stage1(), a, tighter, RandomStream(2));
  const Stage1Output reloaded =
      warm_restart_stage1(deserialize_stage1(serialize_stage1(toy_stage1())), b, tighter, RandomStream(2));
  EXPECT_EQ(direct.zeta_trace, reloaded.zeta_trace);
  EXPECT_EQ(direct.eval_counts, reloaded.eval_counts);
}

TEST(Stage1IO, RejectsInconsistentCheckpoint) {
  auto j = nlohmann::json::parse(serialize_stage1(toy_stage1()));
  auto bad = j;
  bad["format_version"] = 99;
  EXPECT_THROW(deserialize_stage1(bad.dump()), FormatError);
  bad = j;
  bad["charges"] = nlohmann::json::array();
  EXPECT_THROW(deserialize_stage1(bad.dump()), FormatError);
  bad = j;
  bad["x_start"] = {1.0, 2.0, 3.0};
  EXPECT_THROW(deserialize_stage1(bad.dump()), FormatError);
  EXPECT_THROW(deserialize_stage1("nope"), FormatError);
}

TEST(TraceLines, SingleLineJson) {
  const Stage1Record& rec = toy_stage1().log.front();
  const std::string line = stage1_record_line(rec);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j.at("zeta").get<double>(), rec.zeta);
  EXPECT_EQ(j.at("iteration").get<std::size_t>(), rec.iteration);

  MPMCRecord m{3, 0.5, 10, 2, 0.1, 0.01};
  const auto mj = nlohmann::json::parse(mpmc_record_line(m));
  EXPECT_EQ(mj.at("perplexity").get<double>(), 0.5);
}

TEST(ResultJson, NullDiagnosticsWhenUndefined) {
  ISResult r;
  r.n = 10;
  const auto j = nlohmann::json::parse(is_result_json(r));
  EXPECT_TRUE(j.at("e_rms").is_null());
  EXPECT_TRUE(j.at("ess").is_null());
  EXPECT_FALSE(j.at("diagnostics_defined").get<bool>());
  r.e_rms = 0.25;
  r.ess = 5.0;
  r.ess_normalized = 0.5;
  r.chi2_divergence = 1.0;
  r.hit_count = 4;
  const auto k = nlohmann::json::parse(is_result_json(r));
  EXPECT_EQ(k.at("e_rms").get<double>(), 0.25);
  EXPECT_EQ(k.at("hit_count").get<std::size_t>(), 4u);
}

}  // namespace
}  // namespace abimc
