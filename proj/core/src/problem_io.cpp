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

#include "abimc/problem_io.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "abimc/error.hpp"
#include "json_eigen.hpp"

namespace abimc {

using json = nlohmann::ordered_json;

std::string serialize_problem(const ProblemDefinition& def) {
  json j;
  j["format_version"] = kProblemFormatVersion;
  j["order"] = to_string(def.order);
  j["m"] = def.m();
  j["m_int"] = def.polynomial ? def.polynomial->m_int : def.m();
  if (def.polynomial) {
    const auto& p = *def.polynomial;
    if (!p.S.empty() && std::any_of(p.S.begin(), p.S.end(), [](double v) { return v != 0.0; })) {
      j["S"] = p.S;
    }
    j["H"] = detail::matrix_to_json(p.H);
    j["b"] = detail::vector_to_json(p.b);
    j["c"] = p.c;
  }
  j["nominal_mean"] = detail::vector_to_json(def.nominal_mean);
  j["nominal_cov"] = detail::matrix_to_json(def.nominal_cov);
  j["interval_lo"] = def.interval.lo;
  j["interval_hi"] = def.interval.hi;
  j["calibration"] = {{"pilot_n", def.calibration.pilot_n},
                      {"pilot_estimate", def.calibration.pilot_estimate},
                      {"seed", def.calibration.seed}};
  return j.dump(2) + "\n";
}

ProblemDefinition deserialize_problem(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("problem file: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kProblemFormatVersion) {
      throw FormatError("problem file: unsupported format_version");
    }
    ProblemDefinition def;
    def.order = parse_map_order(j.at("order").get<std::string>());
    const auto m = j.at("m").get<Eigen::Index>();
    const auto m_int = j.at("m_int").get<Eigen::Index>();
    if (m < 1 || m_int < 1) throw DimensionError("problem file: dimensions must be positive");
    if (m_int > m) {
      throw DimensionError("problem file: m_int = " + std::to_string(m_int) + " exceeds m = " +
                           std::to_string(m));
    }
    def.nominal_mean = detail::vector_from_json(j.at("nominal_mean"));
    def.nominal_cov = detail::matrix_from_json(j.at("nominal_cov"));
    if (def.nominal_mean.size() != m || def.nominal_cov.rows() != m || def.nominal_cov.cols() != m) {
      throw DimensionError("problem file: nominal dimensions disagree with m");
    }
    def.interval = {j.at("interval_lo").get<double>(), j.at("interval_hi").get<double>()};
    if (!(def.interval.lo < def.interval.hi)) throw FormatError("problem file: interval_lo >= interval_hi");
    const auto& cal = j.at("calibration");
    def.calibration.interval = def.interval;
    def.calibration.pilot_n = cal.at("pilot_n").get<std::uint64_t>();
    def.calibration.pilot_estimate = cal.at("pilot_estimate").get<double>();
    def.calibration.seed = cal.at("seed").get<std::uint64_t>();

    if (def.order == MapOrder::toy) {
      if (m != 2 || m_int != 2) throw DimensionError("problem file: toy problem must be 2-dimensional");
    } else {
      PolynomialMapSpec p;
      p.order = def.order;
      p.m = m;
      p.m_int = m_int;
      p.H = detail::matrix_from_json(j.at("H"));
      p.b = detail::vector_from_json(j.at("b"));
      p.c = j.at("c").get<double>();
      if (def.order == MapOrder::cubic) {
        const auto mm = static_cast<std::size_t>(m);
        p.S = j.contains("S") ? j.at("S").get<std::vector<double>>() : std::vector<double>(mm * mm * mm, 0.0);
      } else if (j.contains("S")) {
        throw FormatError("problem file: quadratic map carries a cubic tensor");
      }
      p.validate();
      def.polynomial = std::move(p);
    }
    return def;
  } catch (const json::exception& e) {
    throw FormatError(std::string("problem file: ") + e.what());
  }
}

ProblemDefinition read_problem_file(const std::filesystem::path& path) {
  return deserialize_problem(read_text_file(path));
}

void write_problem_file(const std::filesystem::path& path, const ProblemDefinition& def) {
  write_text_file(path, serialize_problem(def));
}

ForwardProblem instantiate(const ProblemDefinition& def) {
  Gaussian nominal(def.nominal_mean, def.nominal_cov);
  if (def.order == MapOrder::toy) {
    return ForwardProblem(std::make_shared<ToyMap>(), std::move(nominal), def.interval);
  }
  return ForwardProblem(std::make_shared<PolynomialMap>(*def.polynomial), std::move(nominal), def.interval);
}

ProblemDefinition toy_definition(std::uint64_t pilot_n, std::uint64_t seed) {
  ProblemDefinition def;
  def.order = MapOrder::toy;
  const Gaussian p = toy_nominal();
  def.nominal_mean = p.mean();
  def.nominal_cov = p.covariance();
  def.interval = kToyInterval;
  def.calibration.interval = kToyInterval;
  def.calibration.pilot_n = pilot_n;
  def.calibration.seed = seed;
  def.calibration.pilot_estimate = pilot_probability(ToyMap{}, p, kToyInterval, pilot_n, RandomStream(seed));
  return def;
}

ProblemDefinition polynomial_definition(MapOrder order, Eigen::Index m, Eigen::Index m_int,
                                        double target_prob, std::uint64_t seed, std::uint64_t pilot_n) {
  const RandomStream rng(seed);
  PolynomialMapSpec spec = generate_polynomial(order, m, m_int, rng.child(0));
  const Gaussian p = polynomial_nominal(m);
  const PolynomialMap map(spec);
  const Calibration cal = calibrate_interval(map, p, target_prob, rng.child(1).key(), pilot_n);
  ProblemDefinition def;
  def.order = order;
  def.polynomial = std::move(spec);
  def.nominal_mean = p.mean();
  def.nominal_cov = p.covariance();
  def.interval = cal.interval;
  def.calibration = cal;
  return def;
}

std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace abimc
