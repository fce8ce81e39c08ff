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

#ifndef ABIMC_RANDOM_HPP
#define ABIMC_RANDOM_HPP

#include <cstdint>
#include <random>

namespace abimc {

/// Counter-based seed tree. A stream is identified by a 64-bit key; child
/// streams are derived by hashing the parent key with a tag, so the random
/// numbers drawn for a given (seed, path) never depend on scheduling.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0);

  RandomStream child(std::uint64_t tag) const;

  /// Fresh engine positioned at the start of this stream.
  std::mt19937_64 engine() const;

  std::uint64_t key() const { return key_; }

 private:
  struct FromKey {};
  RandomStream(FromKey, std::uint64_t key) : key_(key) {}

  std::uint64_t key_;
};

}  // namespace abimc

#endif  // ABIMC_RANDOM_HPP
