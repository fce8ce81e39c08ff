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

// Command-line front end: problem generation, estimator runs and restarts.
// Exit codes: 0 success, 1 usage, 2 problem file or checkpoint, 3 stage-1 or
// density construction failure, 4 stage-2 failure (rank-deficient mixture),
// 5 no sample hit the target interval.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif
#include <spdlog/spdlog.h>

#include "abimc/error.hpp"
#include "abimc/estimator.hpp"
#include "abimc/parallel.hpp"
#include "abimc/problem_io.hpp"
#include "abimc/serialization.hpp"
#include "output.hpp"

namespace fs = std::filesystem;

namespace abimc::cli {
namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kProblemFile = 2, kConstruction = 3, kStage2 = 4, kZeroHit = 5 };

/// Ends a command with an exit code and a message for stderr.
struct Failure {
  int code;
  std::string message;
};

struct GenOptions {
  std::string order = "toy";
  std::int64_t m = 0;
  std::optional<std::int64_t> m_int;
  double target_prob = 1e-3;
  std::uint64_t seed = kDefaultSeed;
  std::optional<std::uint64_t> pilot_n;
  std::string out;
};

struct Overrides {
  std::optional<double> eps_abs;
  std::optional<double> eps_rel;
  std::optional<std::size_t> n_mpmc;
  std::optional<std::size_t> max_mpmc_iters;
  std::optional<std::size_t> max_components;
  std::optional<std::size_t> kl_samples;
  std::optional<std::size_t> samples;
};

struct RunOptions {
  std::string method = "abimc";
  std::string problem;
  std::size_t samples = 10'000;
  std::uint64_t seed = kDefaultSeed;
  Overrides overrides;
  std::string out;
};

struct RestartOptions {
  std::string from;
  Overrides overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void apply(const Overrides& o, ABIMCConfig& c) {
  if (o.eps_abs) c.stage1.eps_abs = *o.eps_abs;
  if (o.eps_rel) c.stage1.eps_rel = *o.eps_rel;
  if (o.max_components) c.stage1.max_components = *o.max_components;
  if (o.kl_samples) c.stage1.kl_sample_size = *o.kl_samples;
  if (o.n_mpmc) c.mpmc.n_per_iter = *o.n_mpmc;
  if (o.max_mpmc_iters) c.mpmc.max_iters = *o.max_mpmc_iters;
  if (o.samples) c.n_samples = *o.samples;
}

void validate(const ABIMCConfig& c) {
  try {
    c.stage1.validate();
    c.mpmc.validate();
  } catch (const Error& e) {
    throw Failure{kUsage, e.what()};
  }
  if (c.n_samples < 1) throw Failure{kUsage, "--samples must be positive"};
}

std::string sha_of_file(const fs::path& path) { return sha256_hex(read_text_file(path)); }

struct LoadedProblem {
  ProblemDefinition def;
  fs::path path;
  std::string sha256;
};

LoadedProblem load_problem(const fs::path& path, const std::string& expected_sha = {}) {
  try {
    const std::string text = read_text_file(path);
    const std::string sha = sha256_hex(text);
    if (!expected_sha.empty() && sha != expected_sha) {
      throw Failure{kProblemFile, "problem file " + path.string() + " does not match the recorded checksum"};
    }
    return {deserialize_problem(text), fs::absolute(path), sha};
  } catch (const Error& e) {
    throw Failure{kProblemFile, e.what()};
  } catch (const std::ios_base::failure& e) {
    throw Failure{kProblemFile, e.what()};
  }
}

/// State of one run or restart, persisted as manifest.json and results.json.
struct Record {
  std::string command;
  std::string method;
  std::uint64_t seed = 0;
  LoadedProblem problem;
  ABIMCConfig config;
  PhaseCounts counts;
  std::optional<ISResult> result;
  std::vector<double> zeta;
  std::vector<double> perplexity;
  json stage1_summary = nullptr;
  json stage2_summary = nullptr;
  json restarted_from = nullptr;
  int exit_code = kOk;
  std::string message;
};

json results_json(const Record& r) {
  json j{{"format_version", 1},
         {"method", r.method},
         {"seed", r.seed},
         {"problem_sha256", r.problem.sha256},
         {"config", config_to_json(r.config)},
         {"exit_code", r.exit_code},
         {"message", r.message},
         {"eval_counts", phase_counts_to_json(r.counts)},
         {"result", result_to_json(r.result)},
         {"stage1", r.stage1_summary},
         {"stage2", r.stage2_summary}};
  return j;
}

void finish(RunDirectory& dir, const Record& r, const std::vector<std::string>& argv, const std::string& started) {
  dir.write("results.json", results_json(r).dump(2) + "\n");
  json files = json::object();
  for (const auto& [name, sha] : dir.checksums()) files[name] = sha;
  json manifest{{"format_version", 1},
                {"tool", "abimc"},
                {"version", ABIMC_VERSION},
                {"command", r.command},
                {"argv", argv},
                {"method", r.method},
                {"seed", r.seed},
                {"threads", thread_count()},
                {"problem", {{"path", r.problem.path.string()}, {"sha256", r.problem.sha256}}},
                {"config", config_to_json(r.config)},
                {"restarted_from", r.restarted_from},
                {"eval_counts", phase_counts_to_json(r.counts)},
                {"results", result_to_json(r.result)},
                {"traces", {{"zeta", r.zeta}, {"perplexity", r.perplexity}}},
                {"status", {{"exit_code", r.exit_code}, {"message", r.message}}},
                {"files", files},
                {"started_utc", started},
                {"finished_utc", utc_now()}};
  write_text_file(dir.path() / "manifest.json", manifest.dump(2) + "\n");
}

json stage1_summary(const Stage1Output& s) {
  return json{{"components", s.mixture.size()},
              {"charges", s.charges.size()},
              {"reason", to_string(s.reason)},
              {"eval_counts", counts_to_json(s.eval_counts)}};
}

json stage2_summary(const MPMCResult& s) {
  return json{{"iterations", s.trace.iterations.size()},
              {"components", s.mixture.size()},
              {"reason", to_string(s.trace.reason)},
              {"diagnostic", s.trace.diagnostic}};
}

void write_stage1(RunDirectory& dir, Record& rec, const Stage1Output& s1) {
  dir.write("checkpoint.json", serialize_stage1(s1));
  std::string lines;
  for (const auto& r : s1.log) lines += stage1_record_line(r) + "\n";
  dir.write("stage1_trace.jsonl", lines);
  rec.counts.stage1 = s1.eval_counts;
  rec.zeta = s1.zeta_trace;
  rec.stage1_summary = stage1_summary(s1);
}

/// Stage 2 and the final estimate shared by run and restart.
void refine_and_estimate(RunDirectory& dir, Record& rec, const ForwardProblem& problem, const Stage1Output& s1,
                         const RandomStream& rng) {
  const OracleCounts before = problem.counts();
  MPMCResult s2 = [&] {
    try {
      return refine_mixture(problem, s1, rec.config.mpmc, stage2_stream(rng));
    } catch (const Error& e) {
      throw Failure{kStage2, std::string("stage2: ") + e.what()};
    }
  }();
  rec.counts.stage2 = problem.counts() - before;
  std::string lines;
  for (const auto& r : s2.trace.iterations) {
    lines += mpmc_record_line(r) + "\n";
    rec.perplexity.push_back(r.perplexity);
  }
  dir.write("mpmc_trace.jsonl", lines);
  dir.write("mixture_final.json", serialize_mixture(s2.mixture));
  rec.stage2_summary = stage2_summary(s2);
  if (s2.trace.reason == MPMCTermination::rank_deficient) {
    rec.exit_code = kStage2;
    rec.message = "stage2: " + s2.trace.diagnostic + "; last valid mixture saved to mixture_final.json";
    return;
  }
  const OracleCounts est_before = problem.counts();
  std::vector<double> weights;
  rec.result = importance_sample(problem, s2.mixture, rec.config.n_samples, estimation_stream(rng), &weights);
  rec.counts.estimation = problem.counts() - est_before;
  dir.write("convergence.tsv", convergence_table(weights));
}

void check_zero_hit(Record& rec) {
  if (rec.exit_code == kOk && rec.result && rec.result->hit_count == 0) {
    rec.exit_code = kZeroHit;
    rec.message = "no sample hit the target interval; diagnostics undefined";
  }
}

/// Runs body and persists whatever state it reached. Returns the exit code.
template <class Body>
int with_record(RunDirectory& dir, Record& rec, const std::vector<std::string>& argv, Body&& body) {
  const std::string started = utc_now();
  try {
    body();
    check_zero_hit(rec);
  } catch (const Failure& f) {
    rec.exit_code = f.code;
    rec.message = f.message;
  }
  finish(dir, rec, argv, started);
  if (rec.exit_code != kOk) std::cerr << "abimc: " << rec.message << "\n";
  return rec.exit_code;
}

int cmd_gen(const GenOptions& o) {
  ProblemDefinition def;
  try {
    const MapOrder order = parse_map_order(o.order);
    if (order == MapOrder::toy) {
      def = toy_definition(o.pilot_n.value_or(kToyPilotSize), o.seed);
    } else {
      if (o.m < 1) throw Failure{kUsage, "--m must be positive for polynomial maps"};
      const std::int64_t m_int = o.m_int.value_or(o.m);
      if (m_int < 1 || m_int > o.m) throw Failure{kUsage, "--m-int must lie in [1, m]"};
      if (!(o.target_prob > 0.0 && o.target_prob < 1.0)) throw Failure{kUsage, "--target-prob must lie in (0, 1)"};
      def = polynomial_definition(order, o.m, m_int, o.target_prob, o.seed, o.pilot_n.value_or(kDefaultPilotSize));
    }
  } catch (const CalibrationError& e) {
    throw Failure{kProblemFile, e.what()};
  } catch (const Error& e) {
    throw Failure{kUsage, e.what()};
  }
  write_problem_file(o.out, def);
  spdlog::info("wrote {} (interval [{}, {}], pilot estimate {})", o.out, def.interval.lo, def.interval.hi,
               def.calibration.pilot_estimate);
  return kOk;
}

int cmd_run(const RunOptions& o, const std::vector<std::string>& argv) {
  Record rec;
  rec.command = "run";
  rec.method = o.method;
  rec.seed = o.seed;
  rec.config.n_samples = o.samples;
  apply(o.overrides, rec.config);
  validate(rec.config);
  rec.problem = load_problem(o.problem);
  const ForwardProblem problem = instantiate(rec.problem.def);
  const RandomStream rng(o.seed);
  RunDirectory dir(o.out);

  return with_record(dir, rec, argv, [&] {
    if (o.method == "mc") {
      std::vector<double> weights;
      rec.result = simple_monte_carlo(problem, rec.config.n_samples, estimation_stream(rng), &weights);
      rec.counts.estimation = problem.counts();
      dir.write("convergence.tsv", convergence_table(weights));
    } else if (o.method == "bimc") {
      const GaussianMixture q = [&] {
        try {
          return bimc_baseline(problem);
        } catch (const Error& e) {
          throw Failure{kConstruction, std::string("bimc: ") + e.what()};
        }
      }();
      rec.counts.stage1 = problem.counts();
      dir.write("mixture_final.json", serialize_mixture(q));
      std::vector<double> weights;
      rec.result = importance_sample(problem, q, rec.config.n_samples, estimation_stream(rng), &weights);
      rec.counts.estimation = problem.counts() - rec.counts.stage1;
      dir.write("convergence.tsv", convergence_table(weights));
    } else {
      const Stage1Output s1 = [&] {
        try {
          return run_stage1(problem, rec.config.stage1, stage1_stream(rng));
        } catch (const Error& e) {
          rec.counts.stage1 = problem.counts();
          throw Failure{kConstruction, std::string("stage1: ") + e.what()};
        }
      }();
      write_stage1(dir, rec, s1);
      refine_and_estimate(dir, rec, problem, s1, rng);
    }
  });
}

int cmd_restart(const RestartOptions& o, const std::vector<std::string>& argv) {
  const fs::path from(o.from);
  json manifest;
  try {
    manifest = json::parse(read_text_file(from / "manifest.json"));
  } catch (const std::exception& e) {
    throw Failure{kProblemFile, "cannot read " + (from / "manifest.json").string() + ": " + e.what()};
  }
  Record rec;
  std::optional<Stage1Output> previous;
  try {
    if (manifest.at("method") != "abimc") throw Failure{kProblemFile, "restart needs an abimc run directory"};
    const json& files = manifest.at("files");
    if (!files.contains("checkpoint.json")) throw Failure{kProblemFile, "run directory has no Stage-1 checkpoint"};
    for (const auto& [name, sha] : files.items()) {
      if (sha_of_file(from / name) != sha.get<std::string>()) {
        throw Failure{kProblemFile, name + " does not match the checksum in the manifest"};
      }
    }
    previous.emplace(deserialize_stage1(read_text_file(from / "checkpoint.json")));
    config_from_json(manifest.at("config"), rec.config);
    rec.seed = o.seed.value_or(manifest.at("seed").get<std::uint64_t>());
    rec.problem = load_problem(manifest.at("problem").at("path").get<std::string>(),
                               manifest.at("problem").at("sha256").get<std::string>());
  } catch (const json::exception& e) {
    throw Failure{kProblemFile, std::string("malformed manifest: ") + e.what()};
  } catch (const Error& e) {
    throw Failure{kProblemFile, std::string("corrupt checkpoint: ") + e.what()};
  } catch (const std::ios_base::failure& e) {
    throw Failure{kProblemFile, e.what()};
  }
  rec.command = "restart";
  rec.method = "abimc";
  rec.restarted_from = json{{"dir", fs::absolute(from).string()}, {"manifest_sha256", sha_of_file(from / "manifest.json")}};
  const bool rerun_stage1 = o.overrides.eps_abs || o.overrides.eps_rel || o.overrides.max_components;
  Overrides overrides = o.overrides;
  // A tighter absolute tolerance alone also tightens the relative one.
  if (overrides.eps_abs && !overrides.eps_rel) overrides.eps_rel = std::min(rec.config.stage1.eps_rel, 1.0 - *overrides.eps_abs);
  apply(overrides, rec.config);
  validate(rec.config);
  if (previous->mixture.dim() != rec.problem.def.m()) throw Failure{kProblemFile, "checkpoint dimension does not match the problem"};

  const ForwardProblem problem = instantiate(rec.problem.def);
  const RandomStream rng(rec.seed);
  RunDirectory dir(o.out.empty() ? from.string() + "-restart" : o.out);

  return with_record(dir, rec, argv, [&] {
    Stage1Output s1 = *previous;
    if (rerun_stage1) {
      try {
        s1 = warm_restart_stage1(*previous, problem, rec.config.stage1, stage1_stream(rng));
      } catch (const Error& e) {
        rec.counts.stage1 = previous->eval_counts + problem.counts();
        throw Failure{kConstruction, std::string("stage1: ") + e.what()};
      }
    }
    write_stage1(dir, rec, s1);
    refine_and_estimate(dir, rec, problem, s1, rng);
  });
}

void add_overrides(CLI::App* app, Overrides& o) {
  app->add_option("--eps-abs", o.eps_abs, "Stage-1 absolute tolerance on zeta, in (0, 1]");
  app->add_option("--eps-rel", o.eps_rel, "Stage-1 relative tolerance on zeta, in [0, 1)");
  app->add_option("--max-components", o.max_components, "Stage-1 component cap");
  app->add_option("--kl-samples", o.kl_samples, "Samples per Stage-1 KL estimate");
  app->add_option("--n-mpmc", o.n_mpmc, "MPMC samples per iteration");
  app->add_option("--max-mpmc-iters", o.max_mpmc_iters, "MPMC iteration cap");
}

}  // namespace
}  // namespace abimc::cli

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::string> args(argv, argv + argc);

  CLI::App app{"Adaptive importance sampling for rare-event probabilities"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ABIMC_VERSION);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  abimc::cli::GenOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Write a calibrated problem file");
  gen_cmd->add_option("--order", gen.order, "toy, quadratic or cubic")
      ->check(CLI::IsMember({"toy", "quadratic", "cubic"}));
  gen_cmd->add_option("--m", gen.m, "Input dimension");
  gen_cmd->add_option("--m-int", gen.m_int, "Number of interacting inputs (default m)");
  gen_cmd->add_option("--target-prob", gen.target_prob, "Target event probability for calibration");
  gen_cmd->add_option("--seed", gen.seed, "Random seed");
  gen_cmd->add_option("--pilot-n", gen.pilot_n, "Pilot Monte Carlo sample count");
  gen_cmd->add_option("--out", gen.out, "Output problem file")->required();

  abimc::cli::RunOptions run;
  CLI::App* run_cmd = app.add_subcommand("run", "Estimate the event probability");
  run_cmd->add_option("--method", run.method, "mc, bimc or abimc")->check(CLI::IsMember({"mc", "bimc", "abimc"}));
  run_cmd->add_option("--problem", run.problem, "Problem file")->required();
  run_cmd->add_option("--samples", run.samples, "Final sample count N");
  run_cmd->add_option("--seed", run.seed, "Random seed");
  abimc::cli::add_overrides(run_cmd, run.overrides);
  run_cmd->add_option("--out", run.out, "Output directory")->required();

  abimc::cli::RestartOptions restart;
  CLI::App* restart_cmd = app.add_subcommand("restart", "Resume an abimc run from its checkpoint");
  restart_cmd->add_option("--from", restart.from, "Run directory to resume")->required();
  restart_cmd->add_option("--samples", restart.overrides.samples, "Final sample count N");
  restart_cmd->add_option("--seed", restart.seed, "Random seed (default: the original run's)");
  abimc::cli::add_overrides(restart_cmd, restart.overrides);
  restart_cmd->add_option("--out", restart.out, "Output directory (default: <from>-restart)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : abimc::cli::kUsage;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*gen_cmd) return abimc::cli::cmd_gen(gen);
    if (*run_cmd) return abimc::cli::cmd_run(run, args);
    return abimc::cli::cmd_restart(restart, args);
  } catch (const abimc::cli::Failure& f) {
    std::cerr << "abimc: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "abimc: " << e.what() << "\n";
    return abimc::cli::kConstruction;
  }
}
