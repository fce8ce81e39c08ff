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

#ifndef ABIMC_SRC_JSON_EIGEN_HPP
#define ABIMC_SRC_JSON_EIGEN_HPP

#include <nlohmann/json.hpp>

#include "abimc/distributions.hpp"
#include "abimc/error.hpp"

namespace abimc::detail {

using json = nlohmann::ordered_json;

inline json vector_to_json(const Vector& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw FormatError("expected an array of reals");
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline json matrix_to_json(const Matrix& a) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) rows.push_back(vector_to_json(a.row(i).transpose()));
  return rows;
}

inline Matrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw FormatError("expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Vector row = vector_from_json(j.at(static_cast<std::size_t>(i)));
    if (row.size() != cols) throw FormatError("ragged matrix");
    a.row(i) = row.transpose();
  }
  return a;
}

inline json gaussian_to_json(const Gaussian& g) {
  return json{{"mean", vector_to_json(g.mean())}, {"cov", matrix_to_json(g.covariance())}};
}

inline Gaussian gaussian_from_json(const json& j) {
  return Gaussian(vector_from_json(j.at("mean")), matrix_from_json(j.at("cov")));
}

inline json mixture_to_json(const GaussianMixture& q) {
  json comps = json::array();
  for (const auto& c : q.components()) comps.push_back(gaussian_to_json(c));
  return json{{"weights", q.weights()}, {"components", std::move(comps)}};
}

inline GaussianMixture mixture_from_json(const json& j) {
  std::vector<Gaussian> comps;
  for (const auto& c : j.at("components")) comps.push_back(gaussian_from_json(c));
  return GaussianMixture(std::move(comps), j.at("weights").get<std::vector<double>>());
}

}  // namespace abimc::detail

#endif  // ABIMC_SRC_JSON_EIGEN_HPP
