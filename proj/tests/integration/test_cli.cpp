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

// Runs the abimc executable end to end in a scratch directory.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "abimc/problem_io.hpp"

#if !defined(ABIMC_CLI_PATH) || !defined(ABIMC_TEST_DATA_DIR)
#error "ABIMC_CLI_PATH and ABIMC_TEST_DATA_DIR must be defined"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path kData{ABIMC_TEST_DATA_DIR};

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("abimc_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  // Exit status of `abimc args`, stderr kept in last_stderr_.
  static int abimc(const std::string& args) {
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && '" + std::string(ABIMC_CLI_PATH) + "' " + args +
                            " > /dev/null 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    last_stderr_ = read(err);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static json read_json(const fs::path& p) { return json::parse(read(p)); }

  // Small quadratic problem whose MPMC collapses at N_MPMC = 1000.
  static const fs::path& quadratic16() {
    static const fs::path p = [] {
      EXPECT_EQ(abimc("gen --order quadratic --m 16 --m-int 16 --target-prob 1e-3 --seed 7 --pilot-n 200000 "
                      "--out q16.prob"),
                0);
      return dir_ / "q16.prob";
    }();
    return p;
  }

  static inline fs::path dir_;
  static inline std::string last_stderr_;
};

TEST_F(Cli, GenToyMatchesShippedFixture) {
  ASSERT_EQ(abimc("gen --order toy --out toy.prob"), 0);
  EXPECT_EQ(read(dir_ / "toy.prob"), read(kData / "toy.prob"));
}

TEST_F(Cli, GenQuadraticCalibration) {
  ASSERT_EQ(abimc("gen --order quadratic --m 16 --m-int 8 --target-prob 1e-3 --seed 7 --out q.prob"), 0);
  const abimc::ProblemDefinition def = abimc::read_problem_file(dir_ / "q.prob");
  EXPECT_EQ(def.calibration.pilot_n, 10'000'000u);
  EXPECT_GE(def.calibration.pilot_estimate, 5e-4);
  EXPECT_LE(def.calibration.pilot_estimate, 2e-3);
  EXPECT_EQ(def.polynomial->m_int, 8);
}

TEST_F(Cli, GenRejectsBadDimensions) {
  EXPECT_EQ(abimc("gen --order quadratic --m 16 --m-int 32 --target-prob 1e-3 --out bad.prob"), 1);
  EXPECT_NE(last_stderr_.find("--m-int"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "bad.prob"));
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(abimc("run --method nope --problem x --out y"), 1);
  EXPECT_EQ(abimc("frobnicate"), 1);
  EXPECT_EQ(abimc("run --method abimc --problem '" + (kData / "toy.prob").string() + "' --eps-abs 0 --out e"), 1);
}

TEST_F(Cli, MissingProblemFile) {
  EXPECT_EQ(abimc("run --method mc --problem does_not_exist.prob --out missing"), 2);
}

TEST_F(Cli, MonteCarloToy) {
  ASSERT_EQ(abimc("run --method mc --problem '" + (kData / "toy.prob").string() + "' --samples 1000000 --seed 1 --out mc"), 0);
  const json r = read_json(dir_ / "mc" / "results.json");
  const double mu = r["result"]["mu_hat"].get<double>();
  EXPECT_GE(mu, 3.413e-2 - 4.68e-4);
  EXPECT_LE(mu, 3.413e-2 + 4.68e-4);
  EXPECT_EQ(r["exit_code"].get<int>(), 0);
  const json m = read_json(dir_ / "mc" / "manifest.json");
  EXPECT_EQ(m["problem"]["sha256"].get<std::string>(), abimc::sha256_hex(read(kData / "toy.prob")));
  for (const auto& [name, sha] : m["files"].items()) {
    EXPECT_EQ(sha.get<std::string>(), abimc::sha256_hex(read(dir_ / "mc" / name))) << name;
  }
}

TEST_F(Cli, ZeroHitExitCode) {
  EXPECT_EQ(abimc("run --method mc --problem '" + (kData / "toy.prob").string() + "' --samples 3 --seed 1 --out zero"), 5);
  const json r = read_json(dir_ / "zero" / "results.json");
  EXPECT_EQ(r["result"]["hit_count"].get<int>(), 0);
  EXPECT_TRUE(r["result"]["e_rms"].is_null());
}

TEST_F(Cli, AbimcRunIsReproducibleAndNested) {
  const std::string args = "run --method abimc --problem '" + (kData / "toy.prob").string() +
                           "' --samples 4096 --seed 3 --n-mpmc 20000 --max-mpmc-iters 10 --out ";
  ASSERT_EQ(abimc(args + "a1"), 0);
  ASSERT_EQ(abimc(args + "a2"), 0);
  ASSERT_EQ(::setenv("ABIMC_NUM_THREADS", "3", 1), 0);
  ASSERT_EQ(abimc(args + "a3"), 0);
  ::unsetenv("ABIMC_NUM_THREADS");
  for (const char* f : {"results.json", "convergence.tsv", "stage1_trace.jsonl", "mpmc_trace.jsonl",
                        "checkpoint.json", "mixture_final.json"}) {
    EXPECT_EQ(read(dir_ / "a1" / f), read(dir_ / "a2" / f)) << f;
    EXPECT_EQ(read(dir_ / "a1" / f), read(dir_ / "a3" / f)) << f;
  }

  // The 2048-sample prefix of this run is the whole of a 2048-sample run.
  const std::string half = "run --method abimc --problem '" + (kData / "toy.prob").string() +
                           "' --samples 2048 --seed 3 --n-mpmc 20000 --max-mpmc-iters 10 --out a4";
  ASSERT_EQ(abimc(half), 0);
  const std::string table = read(dir_ / "a1" / "convergence.tsv");
  const json small = read_json(dir_ / "a4" / "results.json");
  std::istringstream lines(table);
  std::string line;
  bool found = false;
  while (std::getline(lines, line)) {
    if (line.rfind("2048\t", 0) != 0) continue;
    std::istringstream cols(line);
    std::string n, mu;
    cols >> n >> mu;
    EXPECT_DOUBLE_EQ(std::stod(mu), small["result"]["mu_hat"].get<double>());
    found = true;
  }
  EXPECT_TRUE(found);
}

TEST_F(Cli, RankDeficiencyThenRestart) {
  const std::string problem = quadratic16().string();
  ASSERT_EQ(abimc("run --method abimc --problem '" + problem + "' --samples 1000 --seed 1 --n-mpmc 1000 --out rd"), 4);
  EXPECT_NE(last_stderr_.find("rank-deficient"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "rd" / "mixture_final.json"));
  const json r = read_json(dir_ / "rd" / "results.json");
  EXPECT_TRUE(r["result"].is_null());
  EXPECT_EQ(r["stage2"]["reason"].get<std::string>(), "rank_deficient");

  ASSERT_EQ(abimc("restart --from rd --n-mpmc 50000 --max-mpmc-iters 5 --out rd2"), 0);
  const json r2 = read_json(dir_ / "rd2" / "results.json");
  EXPECT_EQ(r2["eval_counts"]["stage1"], r["eval_counts"]["stage1"]);
  EXPECT_EQ(r2["eval_counts"]["stage2"]["value"].get<int>(), 0);
  EXPECT_EQ(r2["eval_counts"]["estimation"]["value"].get<int>(), 1000);
  EXPECT_FALSE(r2["result"].is_null());
  const json m2 = read_json(dir_ / "rd2" / "manifest.json");
  EXPECT_FALSE(m2["restarted_from"].is_null());
}

TEST_F(Cli, RestartWithTighterTolerance) {
  const std::string problem = quadratic16().string();
  ASSERT_EQ(abimc("run --method abimc --problem '" + problem + "' --samples 1000 --seed 2 --n-mpmc 20000 "
                  "--max-mpmc-iters 3 --out base"),
            0);
  ASSERT_EQ(abimc("restart --from base --eps-abs 0.9999 --eps-rel 0.0001 --n-mpmc 20000 --max-mpmc-iters 3 --out tight"), 0);
  const json a = read_json(dir_ / "base" / "results.json");
  const json b = read_json(dir_ / "tight" / "results.json");
  EXPECT_GE(b["stage1"]["components"].get<int>(), a["stage1"]["components"].get<int>());
  EXPECT_GE(b["eval_counts"]["stage1"]["value"].get<int>(), a["eval_counts"]["stage1"]["value"].get<int>());
}

TEST_F(Cli, TamperedCheckpointIsRejected) {
  const std::string problem = quadratic16().string();
  ASSERT_EQ(abimc("run --method abimc --problem '" + problem + "' --samples 500 --seed 4 --n-mpmc 20000 "
                  "--max-mpmc-iters 2 --out tamper"),
            0);
  {
    std::ofstream out(dir_ / "tamper" / "checkpoint.json", std::ios::app);
    out << " ";
  }
  EXPECT_EQ(abimc("restart --from tamper --n-mpmc 20000 --out tamper2"), 2);
  EXPECT_EQ(abimc("restart --from nowhere --out nowhere2"), 2);
}

TEST_F(Cli, BimcBaselineRuns) {
  ASSERT_EQ(abimc("run --method bimc --problem '" + (kData / "toy.prob").string() + "' --samples 10000 --seed 1 --out bimc"), 0);
  const json r = read_json(dir_ / "bimc" / "results.json");
  EXPECT_GT(r["result"]["mu_hat"].get<double>(), 0.0);
  EXPECT_EQ(r["eval_counts"]["stage2"]["value"].get<int>(), 0);
}

}  // namespace
