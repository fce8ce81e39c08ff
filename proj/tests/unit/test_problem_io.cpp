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

#include <cmath>
#include <filesystem>
#include <string>

#include "abimc/error.hpp"
#include "abimc/problem_io.hpp"

#ifndef ABIMC_TEST_DATA_DIR
#error "ABIMC_TEST_DATA_DIR must be defined"
#endif

namespace abimc {
namespace {

const std::filesystem::path kData{ABIMC_TEST_DATA_DIR};

ProblemDefinition small_cubic() {
  ProblemDefinition def;
  def.order = MapOrder::cubic;
  def.polynomial = generate_polynomial(MapOrder::cubic, 4, 3, RandomStream(2));
  def.nominal_mean = polynomial_nominal(4).mean();
  def.nominal_cov = polynomial_nominal(4).covariance();
  def.interval = {1.0 / 3.0, 2.718281828459045};
  def.calibration.interval = def.interval;
  def.calibration.pilot_n = 1000;
  def.calibration.pilot_estimate = 0.1234567890123;
  def.calibration.seed = 9;
  return def;
}

TEST(ProblemIO, RoundTripIsByteIdentical) {
  for (const ProblemDefinition& def : {toy_definition(10, 1), small_cubic()}) {
    const std::string text = serialize_problem(def);
    EXPECT_EQ(serialize_problem(deserialize_problem(text)), text);
  }
}

TEST(ProblemIO, RoundTripIsBitExact) {
  const ProblemDefinition def = small_cubic();
  const ProblemDefinition back = deserialize_problem(serialize_problem(def));
  EXPECT_EQ(back.polynomial->S, def.polynomial->S);
  EXPECT_EQ(back.polynomial->H, def.polynomial->H);
  EXPECT_EQ(back.polynomial->b, def.polynomial->b);
  EXPECT_EQ(back.interval.lo, def.interval.lo);
  EXPECT_EQ(back.interval.hi, def.interval.hi);
  EXPECT_EQ(back.calibration.pilot_estimate, def.calibration.pilot_estimate);
  const ForwardProblem a = instantiate(def);
  const ForwardProblem b = instantiate(back);
  const Vector x = Vector::LinSpaced(4, -1.0, 2.0);
  EXPECT_EQ(a.value(x), b.value(x));
}

TEST(ProblemIO, ShippedToyProblem) {
  const ProblemDefinition def = read_problem_file(kData / "toy.prob");
  EXPECT_EQ(def.order, MapOrder::toy);
  EXPECT_EQ(def.interval.lo, 0.5841);
  EXPECT_EQ(def.interval.hi, 1.0);
  const ForwardProblem problem = instantiate(def);
  Vector x(2);
  x << 0.3, 0.7;
  EXPECT_EQ(problem.value(x), std::sin(0.3) * std::cos(0.7));
  EXPECT_EQ(serialize_problem(def), read_text_file(kData / "toy.prob"));
}

TEST(ProblemIO, RejectsMalformedInput) {
  EXPECT_THROW(deserialize_problem("not json"), FormatError);
  EXPECT_THROW(deserialize_problem("{}"), FormatError);
  std::string text = serialize_problem(small_cubic());
  const auto pos = text.find("\"m_int\": 3");
  ASSERT_NE(pos, std::string::npos);
  std::string tampered = text;
  tampered.replace(pos, 10, "\"m_int\": 5");
  EXPECT_THROW(deserialize_problem(tampered), DimensionError);
  tampered = text;
  tampered.replace(text.find("\"format_version\": 1"), 19, "\"format_version\": 7");
  EXPECT_THROW(deserialize_problem(tampered), FormatError);
}

TEST(ProblemIO, RejectsAsymmetricH) {
  ProblemDefinition def = small_cubic();
  def.polynomial->H(0, 1) += 0.5;
  EXPECT_THROW(deserialize_problem(serialize_problem(def)), FormatError);
}

TEST(ProblemIO, MissingFile) {
  EXPECT_THROW(read_problem_file(kData / "does_not_exist.prob"), FormatError);
}

TEST(Sha256, KnownDigests) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

}  // namespace
}  // namespace abimc
