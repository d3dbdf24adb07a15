#pragma once

#include <chrono>
#include <cstdint>
#include <vector>

#include "replan/scenario.hpp"
#include "replan/velocity_graph.hpp"

namespace replan {

// One receding-horizon planning query sampled along a reference run.
struct PlanQuery {
  double t_ref = 0.0;
  BoundaryState state;
  std::vector<Gate> gates;
};

struct QueryComparison {
  double t_ref = 0.0;
  double time_random = 0.0;
  double time_refocus = 0.0;
  double wall_random_ms = 0.0;
  double wall_refocus_ms = 0.0;
  std::uint64_t edges_random = 0;
  std::uint64_t edges_refocus = 0;
  int refocus_iterations = 0;
};

struct SeedBench {
  std::uint64_t seed = 0;
  std::vector<QueryComparison> queries;
};

struct BenchReport {
  std::vector<SeedBench> seeds;
  double total_wall_random_ms = 0.0;
  double total_wall_refocus_ms = 0.0;
  double mean_wall_random_ms = 0.0;
  double mean_wall_refocus_ms = 0.0;
  double max_wall_random_ms = 0.0;
  double max_wall_refocus_ms = 0.0;
  std::uint64_t total_edges_random = 0;
  std::uint64_t total_edges_refocus = 0;
  // Fraction of queries where refocus found a time within 1% of random's.
  double refocus_within_1pct = 0.0;
  std::uint64_t query_count = 0;
};

// Planning queries along the full-track refocus reference: states sampled at
// a fixed interval of the plan, each paired with the next gate_horizon gates
// still ahead at that plan time.
inline std::vector<PlanQuery> reference_queries(const Scenario& scenario,
                                                double spacing = 0.4) {
  const std::vector<Gate> gates = scenario.all_target_gates(0.0);
  RefocusResult ref =
      plan_refocusing(scenario.start, gates, scenario.cone, scenario.pmm_bounds);
  const std::vector<double> gate_times = ref.plan.gate_times();

  std::vector<PlanQuery> queries;
  for (double t = 0.0; t < ref.plan.total_time; t += spacing) {
    std::size_t next = 0;
    while (next < gate_times.size() && gate_times[next] <= t + 1e-9) ++next;
    if (next >= gates.size()) break;
    PlanQuery q;
    q.t_ref = t;
    const PmmSegment::State s = ref.plan.eval(t);
    q.state = BoundaryState{s.p, s.v};
    for (std::size_t k = next;
         k < gates.size() && q.gates.size() < static_cast<std::size_t>(scenario.gate_horizon);
         ++k) {
      q.gates.push_back(gates[k]);
    }
    queries.push_back(std::move(q));
  }
  return queries;
}

// Runs both strategies on identical queries and aggregates times, solve
// counts and wall clocks per seed.
inline BenchReport run_bench(const Scenario& scenario,
                             const std::vector<std::uint64_t>& seeds, bool lazy = true,
                             double query_spacing = 0.4) {
  if (seeds.empty()) {
    throw Error("run_bench: seed list is empty");
  }
  const std::vector<PlanQuery> queries = reference_queries(scenario, query_spacing);
  if (queries.empty()) {
    throw Error("run_bench: reference run produced no queries");
  }

  using Clock = std::chrono::steady_clock;
  const auto ms_since = [](Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };

  BenchReport report;
  std::uint64_t within = 0;
  for (std::uint64_t seed : seeds) {
    SeedBench sb;
    sb.seed = seed;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      const PlanQuery& q = queries[qi];
      QueryComparison cmp;
      cmp.t_ref = q.t_ref;

      const auto t0 = Clock::now();
      const VelocitySearchResult random =
          plan_random(q.state, q.gates, scenario.cone, scenario.pmm_bounds,
                      scenario.h_random, derive_seed(seed, qi), lazy);
      cmp.wall_random_ms = ms_since(t0);
      cmp.time_random = random.plan.total_time;
      cmp.edges_random = random.edges_evaluated;

      const auto t1 = Clock::now();
      RefocusOptions opts;
      opts.lazy = lazy;
      const RefocusResult refocus =
          plan_refocusing(q.state, q.gates, scenario.cone, scenario.pmm_bounds, opts);
      cmp.wall_refocus_ms = ms_since(t1);
      cmp.time_refocus = refocus.plan.total_time;
      cmp.edges_refocus = refocus.edges_evaluated;
      cmp.refocus_iterations = refocus.iterations;

      report.total_wall_random_ms += cmp.wall_random_ms;
      report.total_wall_refocus_ms += cmp.wall_refocus_ms;
      report.max_wall_random_ms = std::max(report.max_wall_random_ms, cmp.wall_random_ms);
      report.max_wall_refocus_ms = std::max(report.max_wall_refocus_ms, cmp.wall_refocus_ms);
      report.total_edges_random += cmp.edges_random;
      report.total_edges_refocus += cmp.edges_refocus;
      if (cmp.time_refocus <= cmp.time_random * 1.01) ++within;
      ++report.query_count;
      sb.queries.push_back(cmp);
    }
    report.seeds.push_back(std::move(sb));
  }
  report.mean_wall_random_ms = report.total_wall_random_ms / report.query_count;
  report.mean_wall_refocus_ms = report.total_wall_refocus_ms / report.query_count;
  report.refocus_within_1pct = static_cast<double>(within) / report.query_count;
  return report;
}

}  // namespace replan
