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

#ifndef ABIMC_PARALLEL_HPP
#define ABIMC_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace abimc {

/// Number of worker threads. ABIMC_NUM_THREADS overrides the OpenMP default.
int thread_count();

/// Runs body(i) for i in [0, n). Iterations may execute concurrently; callers
/// write results to slot i and reduce afterwards in index order, which keeps
/// every result independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace abimc

#endif  // ABIMC_PARALLEL_HPP
