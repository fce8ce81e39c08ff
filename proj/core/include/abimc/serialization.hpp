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

#ifndef ABIMC_SERIALIZATION_HPP
#define ABIMC_SERIALIZATION_HPP

#include <string>

#include "abimc/distributions.hpp"
#include "abimc/estimator.hpp"
#include "abimc/stage1.hpp"
#include "abimc/stage2.hpp"

namespace abimc {

inline constexpr int kCheckpointFormatVersion = 1;

/// JSON documents with shortest round-trip reals. Readers throw FormatError
/// on malformed input.
std::string serialize_mixture(const GaussianMixture& q);
GaussianMixture deserialize_mixture(const std::string& text);

std::string serialize_stage1(const Stage1Output& out);
Stage1Output deserialize_stage1(const std::string& text);

/// Single-line records for trace files.
std::string stage1_record_line(const Stage1Record& rec);
std::string mpmc_record_line(const MPMCRecord& rec);

/// Single JSON object with the ISResult fields; undefined diagnostics are null.
std::string is_result_json(const ISResult& r, int indent = 2);

}  // namespace abimc

#endif  // ABIMC_SERIALIZATION_HPP
