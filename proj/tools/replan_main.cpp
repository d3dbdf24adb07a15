#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "replan/bench.hpp"
#include "replan/episode.hpp"
#include "replan/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParseError = 2;
constexpr int kExitEpisodeFailure = 3;

struct CommonArgs {
  std::string scenario_path;
  std::string out_dir = "out";
  std::string mode = "replan";
  std::string strategy;
  std::string lazy = "on";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int replan_every = 0;
  bool deterministic = false;
  std::vector<std::uint64_t> seeds;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--scenario", args.scenario_path, "Scenario JSON file")->required();
  cmd->add_option("--out", args.out_dir, "Output directory");
  cmd->add_option("--seed", args.seed, "RNG seed (overrides scenario)")
      ->each([&](const std::string&) { args.seed_set = true; });
  cmd->add_option("--replan-every", args.replan_every,
                  "Replan cadence in control ticks (overrides scenario)");
  cmd->add_option("--lazy", args.lazy, "Lazy edge evaluation: on|off")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_flag("--deterministic", args.deterministic,
                "Force the deterministic synchronous planner");
}

replan::Scenario load_scenario(const CommonArgs& args) {
  replan::ScenarioFile file = replan::parse_scenario(args.scenario_path);
  replan::Scenario sc = file.scenario;
  if (args.seed_set) sc.seed = args.seed;
  if (args.replan_every > 0) sc.replan_every = args.replan_every;
  if (args.deterministic) sc.deterministic = true;
  return sc;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw replan::Error("cannot write " + path.string());
  out << text;
}

int cmd_plan(const CommonArgs& args) {
  const replan::Scenario sc = load_scenario(args);
  const bool lazy = args.lazy != "off";
  const std::string strategy = args.strategy.empty() ? "refocus" : args.strategy;
  std::filesystem::create_directories(args.out_dir);

  const std::vector<replan::Gate> gates = sc.horizon_gates(0, 0.0);
  const auto t0 = std::chrono::steady_clock::now();
  replan::PmmPlan plan;
  std::uint64_t edges = 0;
  if (strategy == "refocus") {
    replan::RefocusOptions opts;
    opts.lazy = lazy;
    replan::RefocusResult r =
        replan::plan_refocusing(sc.start, gates, sc.cone, sc.pmm_bounds, opts);
    plan = std::move(r.plan);
    edges = r.edges_evaluated;
    std::printf("iterations: %d (%s)\n", r.iterations,
                r.converged ? "converged" : "max_iter");
    for (std::size_t k = 0; k < r.iteration_times.size(); ++k) {
      std::printf("T*_%zu = %.6f s (raw %.6f s)\n", k, r.iteration_times[k],
                  r.raw_times[k]);
    }
  } else {
    replan::VelocitySearchResult r = replan::plan_random(
        sc.start, gates, sc.cone, sc.pmm_bounds, sc.h_random, sc.seed, lazy);
    plan = std::move(r.plan);
    edges = r.edges_evaluated;
  }
  const double wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
          .count();

  std::printf("T* = %.6f s over %zu gates\n", plan.total_time, gates.size());
  std::printf("edges evaluated: %llu (bound %llu)\n",
              static_cast<unsigned long long>(edges),
              static_cast<unsigned long long>(replan::edge_count_bound(
                  strategy == "refocus" ? static_cast<std::uint64_t>(sc.cone.s) *
                                              sc.cone.s * sc.cone.s
                                        : sc.h_random,
                  gates.size(), 1)));
  std::printf("wall time: %.3f ms\n", wall_ms);

  write_text(std::filesystem::path(args.out_dir) / "plan.json",
             replan::plan_to_json(plan).dump(2) + "\n");
  const replan::Path path = replan::assemble_path(plan);
  std::ofstream csv(std::filesystem::path(args.out_dir) / "path.csv");
  replan::write_path_csv(path, csv);
  return kExitOk;
}

int cmd_race(const CommonArgs& args) {
  replan::Scenario sc = load_scenario(args);
  const replan::PlanMode mode = args.mode == "fixed"
                                    ? replan::PlanMode::kFixedReference
                                    : replan::PlanMode::kReplanning;
  std::optional<replan::Strategy> strategy;
  if (args.strategy == "random") strategy = replan::Strategy::kRandom;
  if (args.strategy == "refocus") strategy = replan::Strategy::kRefocus;
  std::filesystem::create_directories(args.out_dir);

  const replan::EpisodeResult result = replan::run_episode(sc, mode, sc.seed, strategy);

  write_text(std::filesystem::path(args.out_dir) / "metrics.json",
             replan::episode_result_to_json(result).dump(2) + "\n");
  std::ofstream csv(std::filesystem::path(args.out_dir) / "episode_log.csv");
  replan::write_episode_csv(result, csv);

  std::printf("outcome: %s\n", replan::to_string(result.outcome));
  std::printf("lap_time: %.4f s, gates passed: %d, missed: %d\n",
              result.metrics.lap_time, result.metrics.gates_passed,
              result.metrics.gates_missed);
  std::printf("avg contour error: %.4f m, avg progress rate: %.3f m/s\n",
              result.metrics.avg_contour_error, result.metrics.avg_progress_rate);
  if (!result.error.empty()) std::printf("error: %s\n", result.error.c_str());
  return result.outcome == replan::EpisodeOutcome::kCompleted ? kExitOk
                                                              : kExitEpisodeFailure;
}

int cmd_bench(const CommonArgs& args) {
  const replan::Scenario sc = load_scenario(args);
  if (args.seeds.empty()) {
    throw replan::ParseError("bench requires --seeds with at least one seed");
  }
  const bool lazy = args.lazy != "off";
  std::filesystem::create_directories(args.out_dir);

  const replan::BenchReport report = replan::run_bench(sc, args.seeds, lazy);
  write_text(std::filesystem::path(args.out_dir) / "bench.json",
             replan::bench_report_to_json(report).dump(2) + "\n");

  std::printf("queries: %llu (%zu seeds)\n",
              static_cast<unsigned long long>(report.query_count), args.seeds.size());
  std::printf("%-22s %14s %14s\n", "", "random", "refocus");
  std::printf("%-22s %14.3f %14.3f\n", "mean wall [ms]", report.mean_wall_random_ms,
              report.mean_wall_refocus_ms);
  std::printf("%-22s %14.3f %14.3f\n", "max wall [ms]", report.max_wall_random_ms,
              report.max_wall_refocus_ms);
  std::printf("%-22s %14.3f %14.3f\n", "total wall [ms]", report.total_wall_random_ms,
              report.total_wall_refocus_ms);
  std::printf("%-22s %14llu %14llu\n", "edges",
              static_cast<unsigned long long>(report.total_edges_random),
              static_cast<unsigned long long>(report.total_edges_refocus));
  std::printf("refocus within 1%% of random: %.1f%% of queries\n",
              100.0 * report.refocus_within_1pct);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-optimal quadrotor waypoint planning and replanning"};
  app.require_subcommand(1);

  CommonArgs args;
  CLI::App* plan = app.add_subcommand("plan", "One-shot plan over the first gate horizon");
  add_common_flags(plan, args);
  plan->add_option("--strategy", args.strategy, "random|refocus")
      ->check(CLI::IsMember({"random", "refocus"}));

  CLI::App* race = app.add_subcommand("race", "Run a closed-loop episode");
  add_common_flags(race, args);
  race->add_option("--mode", args.mode, "fixed|replan")
      ->check(CLI::IsMember({"fixed", "replan"}));
  race->add_option("--strategy", args.strategy, "random|refocus")
      ->check(CLI::IsMember({"random", "refocus"}));

  CLI::App* bench = app.add_subcommand("bench", "Compare sampling strategies");
  add_common_flags(bench, args);
  bench->add_option("--seeds", args.seeds, "Seeds for the random strategy")
      ->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan->parsed()) return cmd_plan(args);
    if (race->parsed()) return cmd_race(args);
    if (bench->parsed()) return cmd_bench(args);
  } catch (const replan::ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kExitParseError;
  } catch (const replan::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitEpisodeFailure;
  }
  return kExitOk;
}
