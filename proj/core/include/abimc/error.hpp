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

#ifndef ABIMC_ERROR_HPP
#define ABIMC_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace abimc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Covariance is asymmetric, non-finite or otherwise unusable.
class InvalidCovariance : public Error {
 public:
  using Error::Error;
};

/// Covariance is numerically singular. Distinct from InvalidCovariance so
/// that the adaptive stage can report it as a rank-deficiency diagnostic.
class RankDeficientCovariance : public InvalidCovariance {
 public:
  using InvalidCovariance::InvalidCovariance;
};

/// Mixture weights are not a probability vector.
class InvalidWeights : public Error {
 public:
  using Error::Error;
};

/// A Gaussian assigns (numerically) no mass to an interval.
class IntervalUnreachable : public Error {
 public:
  using Error::Error;
};

/// Objective or its gradient is not finite at the starting point.
class ObjectiveBlewUp : public Error {
 public:
  ObjectiveBlewUp(const std::string& what, Eigen::VectorXd point)
      : Error(what), point_(std::move(point)) {}
  const Eigen::VectorXd& point() const { return point_; }

 private:
  Eigen::VectorXd point_;
};

/// Augmented Lagrangian exhausted its outer iterations.
class ConstraintUnreachable : public Error {
 public:
  using Error::Error;
};

/// The importance target evaluates to zero on every sample.
class TargetUnreachable : public Error {
 public:
  using Error::Error;
};

/// A mixture component collapsed during density refinement.
class MixtureRankDeficient : public Error {
 public:
  MixtureRankDeficient(const std::string& what, std::size_t component, int iteration)
      : Error(what), component_(component), iteration_(iteration) {}
  std::size_t component() const { return component_; }
  int iteration() const { return iteration_; }

 private:
  std::size_t component_;
  int iteration_;
};

/// Pilot simulation could not produce a usable target interval.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Malformed problem, checkpoint or mixture file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Baseline could not locate a point mapping into the target interval.
class IntractableInverseProblem : public Error {
 public:
  using Error::Error;
};

enum class Phase { stage1, stage2, estimation };

inline const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::stage1:
      return "stage1";
    case Phase::stage2:
      return "stage2";
    case Phase::estimation:
      return "estimation";
  }
  return "unknown";
}

/// Wraps a failure raised inside one phase of the pipeline. The original
/// exception is nested and can be recovered with std::rethrow_if_nested.
class PhaseError : public Error {
 public:
  PhaseError(Phase phase, const std::string& what)
      : Error(std::string(to_string(phase)) + ": " + what), phase_(phase) {}
  Phase phase() const { return phase_; }

 private:
  Phase phase_;
};

}  // namespace abimc

#endif  // ABIMC_ERROR_HPP
