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

#ifndef ABIMC_TOOLS_OUTPUT_HPP
#define ABIMC_TOOLS_OUTPUT_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abimc/estimator.hpp"

namespace abimc::cli {

using json = nlohmann::ordered_json;

json config_to_json(const ABIMCConfig& config);
/// Fields missing from j keep their values in config.
void config_from_json(const json& j, ABIMCConfig& config);

json counts_to_json(const OracleCounts& c);
json phase_counts_to_json(const PhaseCounts& c);
json result_to_json(const std::optional<ISResult>& r);

/// Rows of (n, estimate) over n = 16, 32, ... and the full size, each taken
/// from a prefix of one weight sequence.
std::string convergence_table(const std::vector<double>& weights);

/// Collects the files of one run directory and their checksums.
class RunDirectory {
 public:
  explicit RunDirectory(std::filesystem::path dir);

  const std::filesystem::path& path() const { return dir_; }
  void write(const std::string& name, const std::string& text);
  const std::map<std::string, std::string>& checksums() const { return checksums_; }

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::string> checksums_;
};

/// Current UTC time, ISO 8601.
std::string utc_now();

}  // namespace abimc::cli

#endif  // ABIMC_TOOLS_OUTPUT_HPP
