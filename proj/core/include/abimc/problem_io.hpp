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

#ifndef ABIMC_PROBLEM_IO_HPP
#define ABIMC_PROBLEM_IO_HPP

#include <filesystem>
#include <optional>
#include <string>

#include "abimc/forward_models.hpp"

namespace abimc {

inline constexpr int kProblemFormatVersion = 1;

/// Everything a problem file describes.
struct ProblemDefinition {
  MapOrder order = MapOrder::toy;
  /// Absent for the toy map.
  std::optional<PolynomialMapSpec> polynomial;
  Vector nominal_mean;
  Matrix nominal_cov;
  TargetInterval interval;
  Calibration calibration;

  Eigen::Index m() const { return nominal_mean.size(); }
};

/// JSON text with shortest round-trip reals; stable key order.
std::string serialize_problem(const ProblemDefinition& def);
/// Throws FormatError or DimensionError on malformed input.
ProblemDefinition deserialize_problem(const std::string& text);

ProblemDefinition read_problem_file(const std::filesystem::path& path);
void write_problem_file(const std::filesystem::path& path, const ProblemDefinition& def);

ForwardProblem instantiate(const ProblemDefinition& def);

inline constexpr std::uint64_t kToyPilotSize = 1'000'000;
inline constexpr std::uint64_t kDefaultSeed = 1;

/// Shipped toy problem, with its interval checked by a seeded plain Monte
/// Carlo pilot recorded as calibration metadata.
ProblemDefinition toy_definition(std::uint64_t pilot_n = kToyPilotSize,
                                 std::uint64_t seed = kDefaultSeed);

/// Polynomial problem with nominal N(1, I) and a calibrated interval.
ProblemDefinition polynomial_definition(MapOrder order, Eigen::Index m, Eigen::Index m_int,
                                        double target_prob, std::uint64_t seed,
                                        std::uint64_t pilot_n = kDefaultPilotSize);

/// Hex SHA-256 digest of a byte string.
std::string sha256_hex(const std::string& bytes);

std::string read_text_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace abimc

#endif  // ABIMC_PROBLEM_IO_HPP
