#include "replan/velocity_graph.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace replan {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Gate make_gate(int id, const Vec3& center, const Vec3& exit_dir, double radius = 1.0) {
  Gate g;
  g.id = id;
  g.center = center;
  g.exit_dir = exit_dir.normalized();
  g.pass_radius = radius;
  return g;
}

AxisBoundsXyz default_bounds() {
  return AxisBoundsXyz{AxisBounds{-20.0, 20.0}, AxisBounds{-20.0, 20.0},
                       AxisBounds{-9.0, 25.0}};
}

std::vector<Gate> three_gate_line() {
  return {make_gate(0, Vec3(8, 0, 2), Vec3(1, 0, 0)),
          make_gate(1, Vec3(16, 4, 3), Vec3(0.8, 0.6, 0)),
          make_gate(2, Vec3(22, 12, 2), Vec3(0, 1, 0))};
}

// Exhaustive enumeration over every velocity chain; the independent check
// for Dijkstra on small instances.
double exhaustive_best_time(const BoundaryState& start,
                            const std::vector<Vec3>& positions,
                            const std::vector<std::vector<Vec3>>& node_sets,
                            const AxisBoundsXyz& u) {
  const std::size_t layers = positions.size();
  std::vector<std::size_t> index(layers, 0);
  double best = kInf;
  while (true) {
    double total = 0.0;
    BoundaryState prev = start;
    bool feasible = true;
    for (std::size_t i = 0; i < layers && feasible; ++i) {
      const BoundaryState next{positions[i], node_sets[i][index[i]]};
      try {
        total += solve_segment(prev, next, u).duration;
      } catch (const Error&) {
        feasible = false;
      }
      prev = next;
    }
    if (feasible) best = std::min(best, total);

    std::size_t carry = layers;
    while (carry > 0) {
      --carry;
      if (++index[carry] < node_sets[carry].size()) break;
      index[carry] = 0;
      if (carry == 0) return best;
    }
  }
}

TEST(GridSamples, TwentySevenForSEqualsThree) {
  const Gate gate = make_gate(0, Vec3(5, 0, 2), Vec3(1, 0, 0));
  const ConeGrid cone;
  EXPECT_EQ(grid_samples(gate, cone).size(), 27u);
}

TEST(GridSamples, CollapsedGridIsExitVelocity) {
  const Gate gate = make_gate(0, Vec3(5, 0, 2), Vec3(0, 1, 0));
  ConeGrid cone;
  cone.s = 1;
  cone.v_min = cone.v_max = 5.0;
  cone.yaw_min = cone.yaw_max = 0.0;
  cone.pitch_min = cone.pitch_max = 0.0;
  const std::vector<Vec3> samples = grid_samples(gate, cone);
  ASSERT_EQ(samples.size(), 1u);
  EXPECT_LT((samples[0] - 5.0 * gate.exit_dir).norm(), 1e-12);
}

TEST(GridSamples, SymmetricYawSpanReflects) {
  const Gate gate = make_gate(0, Vec3(0, 0, 2), Vec3(1, 0, 0));
  ConeGrid cone;
  cone.s = 2;
  cone.v_min = cone.v_max = 10.0;
  cone.yaw_min = -0.5;
  cone.yaw_max = 0.5;
  cone.pitch_min = cone.pitch_max = 0.0;
  const std::vector<Vec3> samples = grid_samples(gate, cone);
  ASSERT_EQ(samples.size(), 8u);
  // Reflecting across the exit-direction plane must map the set onto itself.
  const GateFrame frame = gate_frame(gate.exit_dir);
  for (const Vec3& v : samples) {
    const Vec3 mirrored = v - 2.0 * v.dot(frame.n) * frame.n;
    const bool found = std::any_of(samples.begin(), samples.end(), [&](const Vec3& w) {
      return (w - mirrored).norm() < 1e-9;
    });
    EXPECT_TRUE(found);
  }
}

TEST(RandomConeSamples, CountAndBounds) {
  const Gate gate = make_gate(0, Vec3(1, 2, 3), Vec3(0.3, 0.8, 0.2));
  const ConeGrid cone;
  const std::vector<Vec3> samples = random_cone_samples(gate, cone, 150, 9001);
  EXPECT_EQ(samples.size(), 150u);
  for (const Vec3& v : samples) {
    const ConeCoords c = cone_coords_of(gate, v);
    EXPECT_GE(c.speed, cone.v_min - 1e-9);
    EXPECT_LE(c.speed, cone.v_max + 1e-9);
    EXPECT_GE(c.yaw, cone.yaw_min - 1e-9);
    EXPECT_LE(c.yaw, cone.yaw_max + 1e-9);
    EXPECT_GE(c.pitch, cone.pitch_min - 1e-9);
    EXPECT_LE(c.pitch, cone.pitch_max + 1e-9);
  }
}

TEST(RandomConeSamples, ZeroSpanConeIsConstant) {
  const Gate gate = make_gate(0, Vec3(0, 0, 0), Vec3(1, 0, 0));
  ConeGrid cone;
  cone.v_min = cone.v_max = 7.0;
  cone.yaw_min = cone.yaw_max = 0.2;
  cone.pitch_min = cone.pitch_max = -0.1;
  const std::vector<Vec3> samples = random_cone_samples(gate, cone, 20, 5);
  for (const Vec3& v : samples) {
    EXPECT_LT((v - samples[0]).norm(), 1e-12);
  }
}

TEST(RandomConeSamples, DeterministicForFixedSeed) {
  const Gate gate = make_gate(0, Vec3(0, 0, 0), Vec3(0, 0, 1));
  const ConeGrid cone;
  const std::vector<Vec3> a = random_cone_samples(gate, cone, 50, 321);
  const std::vector<Vec3> b = random_cone_samples(gate, cone, 50, 321);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].x(), b[i].x());
    EXPECT_EQ(a[i].y(), b[i].y());
    EXPECT_EQ(a[i].z(), b[i].z());
  }
}

TEST(EdgeCountBound, PaperValues) {
  EXPECT_EQ(edge_count_bound(150, 3, 1), 45150u);
  EXPECT_EQ(edge_count_bound(27, 3, 4), 5940u);
  EXPECT_EQ(edge_count_bound(1, 1, 1), 1u);
}

TEST(ShortestVelocityPath, SingleGateSingleNode) {
  const AxisBoundsXyz u = default_bounds();
  BoundaryState start;
  start.p = Vec3(0, 0, 1);
  const Vec3 node(6.0, 0.0, 0.0);
  const VelocitySearchResult r = shortest_velocity_path(
      start, {Vec3(10, 0, 1)}, {{node}}, u);
  const PmmSegment direct =
      solve_segment(start, BoundaryState{Vec3(10, 0, 1), node}, u);
  EXPECT_DOUBLE_EQ(r.plan.total_time, direct.duration);
  EXPECT_EQ(r.edges_evaluated, 1u);
  ASSERT_EQ(r.velocities.size(), 1u);
  EXPECT_EQ(r.velocities[0], node);
}

TEST(ShortestVelocityPath, MatchesExhaustiveEnumeration) {
  UniformRng rng(2024);
  const AxisBoundsXyz u = default_bounds();
  for (int instance = 0; instance < 200; ++instance) {
    const int layers = 1 + static_cast<int>(rng.uniform(0.0, 3.0));
    std::vector<Vec3> positions;
    std::vector<std::vector<Vec3>> node_sets;
    Vec3 base(0, 0, 2);
    for (int i = 0; i < layers; ++i) {
      base += Vec3(rng.uniform(4.0, 10.0), rng.uniform(-5.0, 5.0), rng.uniform(-1.0, 1.0));
      positions.push_back(base);
      const int h = 1 + static_cast<int>(rng.uniform(0.0, 5.0));
      std::vector<Vec3> nodes;
      for (int j = 0; j < h; ++j) {
        nodes.push_back(Vec3(rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0),
                             rng.uniform(-5.0, 5.0)));
      }
      node_sets.push_back(nodes);
    }
    BoundaryState start;
    start.p = Vec3(0, 0, 2);
    start.v = Vec3(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), 0.0);

    const double oracle = exhaustive_best_time(start, positions, node_sets, u);
    if (!(oracle < kInf)) {
      ASSERT_THROW(shortest_velocity_path(start, positions, node_sets, u, true),
                   NoPathError)
          << "instance " << instance;
      continue;
    }
    const VelocitySearchResult lazy_result =
        shortest_velocity_path(start, positions, node_sets, u, true);
    const VelocitySearchResult full_result =
        shortest_velocity_path(start, positions, node_sets, u, false);
    ASSERT_EQ(lazy_result.plan.total_time, oracle) << "instance " << instance;
    ASSERT_EQ(full_result.plan.total_time, oracle) << "instance " << instance;

    // Lazy evaluation never exceeds the closed-form bound; with lazy off the
    // count meets it exactly.
    std::uint64_t h_max = 0;
    for (const auto& nodes : node_sets) h_max = std::max<std::uint64_t>(h_max, nodes.size());
    EXPECT_LE(lazy_result.edges_evaluated, full_result.edges_evaluated);
    std::uint64_t exact = node_sets[0].size();
    for (std::size_t i = 0; i + 1 < node_sets.size(); ++i) {
      exact += node_sets[i].size() * node_sets[i + 1].size();
    }
    EXPECT_EQ(full_result.edges_evaluated, exact);
    EXPECT_LE(lazy_result.edges_evaluated, edge_count_bound(h_max, node_sets.size(), 1));
  }
}

TEST(ShortestVelocityPath, LazyOffCountMatchesWorstCaseFormula) {
  const AxisBoundsXyz u = default_bounds();
  const std::vector<Gate> gates = three_gate_line();
  BoundaryState start;
  start.p = Vec3(0, 0, 2);
  std::vector<Vec3> positions;
  std::vector<std::vector<Vec3>> node_sets;
  const ConeGrid cone;
  for (std::size_t i = 0; i < gates.size(); ++i) {
    positions.push_back(gates[i].center);
    node_sets.push_back(random_cone_samples(gates[i], cone, 150, derive_seed(1, i)));
  }
  const VelocitySearchResult r = shortest_velocity_path(start, positions, node_sets, u, false);
  EXPECT_EQ(r.edges_evaluated, 45150u);
  EXPECT_EQ(r.edges_evaluated, edge_count_bound(150, 3, 1));

  const VelocitySearchResult lazy = shortest_velocity_path(start, positions, node_sets, u, true);
  EXPECT_LE(lazy.edges_evaluated, 45150u);
  EXPECT_DOUBLE_EQ(lazy.plan.total_time, r.plan.total_time);
}

TEST(ShortestVelocityPath, PlanChainsContinuously) {
  const AxisBoundsXyz u = default_bounds();
  BoundaryState start;
  start.p = Vec3(0, 0, 2);
  const VelocitySearchResult r =
      plan_random(start, three_gate_line(), ConeGrid{}, u, 20, 17);
  ASSERT_EQ(r.plan.segments.size(), 3u);
  double total = 0.0;
  for (std::size_t i = 0; i < r.plan.segments.size(); ++i) {
    total += r.plan.segments[i].duration;
    if (i > 0) {
      const Vec3 dp = r.plan.segments[i].start_position() -
                      r.plan.segments[i - 1].end_position();
      const Vec3 dv = r.plan.segments[i].start_velocity() -
                      r.plan.segments[i - 1].end_velocity();
      EXPECT_EQ(dp.norm(), 0.0);
      EXPECT_EQ(dv.norm(), 0.0);
    }
  }
  EXPECT_DOUBLE_EQ(r.plan.total_time, total);
}

TEST(RefocusCone, CenteredOptimumKeepsCenter) {
  const Gate gate = make_gate(0, Vec3(0, 0, 0), Vec3(1, 0, 0));
  ConeGrid cone;
  cone.v_min = 0.0;
  cone.v_max = 20.0;
  const Vec3 optimum = velocity_from_cone(gate, 10.0, 0.0, 0.0);
  const ConeGrid next = refocus_cone(cone, optimum, gate);
  EXPECT_NEAR(0.5 * (next.v_min + next.v_max), 10.0, 1e-9);
  EXPECT_NEAR(0.5 * (next.yaw_min + next.yaw_max), 0.0, 1e-9);
  EXPECT_NEAR(0.5 * (next.pitch_min + next.pitch_max), 0.0, 1e-9);
  // Step sizes contract by s - 1 per refocus.
  EXPECT_NEAR(next.v_max - next.v_min, (cone.v_max - cone.v_min) / (cone.s - 1), 1e-9);
}

TEST(RefocusCone, BoundaryOptimumStaysClamped) {
  const Gate gate = make_gate(0, Vec3(0, 0, 0), Vec3(1, 0, 0));
  ConeGrid cone;
  const Vec3 optimum = velocity_from_cone(gate, cone.v_max, cone.yaw_max, cone.pitch_max);
  const ConeGrid next = refocus_cone(cone, optimum, gate);
  EXPECT_LE(next.v_max, cone.v_max + 1e-12);
  EXPECT_GE(next.v_min, cone.v_min - 1e-12);
  EXPECT_LE(next.yaw_max, cone.yaw_max + 1e-12);
  EXPECT_GE(next.yaw_min, cone.yaw_min - 1e-12);
  EXPECT_LE(next.pitch_max, cone.pitch_max + 1e-12);
  EXPECT_GE(next.pitch_min, cone.pitch_min - 1e-12);
}

TEST(RefocusCone, SpansShrinkMonotonically) {
  const Gate gate = make_gate(0, Vec3(0, 0, 0), Vec3(1, 0, 0));
  ConeGrid cone;
  UniformRng rng(88);
  for (int iter = 0; iter < 5; ++iter) {
    const Vec3 optimum = velocity_from_cone(
        gate, rng.uniform(cone.v_min, cone.v_max), rng.uniform(cone.yaw_min, cone.yaw_max),
        rng.uniform(cone.pitch_min, cone.pitch_max));
    const ConeGrid next = refocus_cone(cone, optimum, gate);
    EXPECT_LE(next.v_max - next.v_min, (cone.v_max - cone.v_min) + 1e-12);
    EXPECT_LE(next.yaw_max - next.yaw_min, (cone.yaw_max - cone.yaw_min) + 1e-12);
    EXPECT_LE(next.pitch_max - next.pitch_min, (cone.pitch_max - cone.pitch_min) + 1e-12);
    if (iter >= 1) {
      EXPECT_LT(next.v_max - next.v_min, 20.0);
    }
    cone = next;
  }
}

TEST(PlanRefocusing, IterationTimesNonIncreasing) {
  BoundaryState start;
  start.p = Vec3(0, 0, 2);
  const RefocusResult r = plan_refocusing(start, three_gate_line(), ConeGrid{},
                                          default_bounds());
  ASSERT_GE(r.iterations, 2);
  for (std::size_t k = 1; k < r.iteration_times.size(); ++k) {
    EXPECT_LE(r.iteration_times[k], r.iteration_times[k - 1] + 1e-12);
  }
  EXPECT_DOUBLE_EQ(r.iteration_times.back(), r.plan.total_time);
}

TEST(PlanRefocusing, TerminatesOnSmallImprovement) {
  BoundaryState start;
  start.p = Vec3(0, 0, 2);
  RefocusOptions opts;
  opts.eps = 0.99;
  opts.max_iter = 50;
  const RefocusResult r =
      plan_refocusing(start, three_gate_line(), ConeGrid{}, default_bounds(), opts);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(r.iterations, opts.max_iter);
  // The converged check fires exactly when the latest raw improvement is
  // under 1%.
  ASSERT_GE(r.raw_times.size(), 2u);
  const double last = r.raw_times.back();
  const double prev = r.raw_times[r.raw_times.size() - 2];
  EXPECT_GT(last, opts.eps * prev);
}

TEST(PlanRefocusing, ChosenVelocitiesInsideInitialCone) {
  BoundaryState start;
  start.p = Vec3(0, 0, 2);
  const ConeGrid cone;
  const std::vector<Gate> gates = three_gate_line();
  const RefocusResult r = plan_refocusing(start, gates, cone, default_bounds());
  ASSERT_EQ(r.velocities.size(), gates.size());
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const ConeCoords c = cone_coords_of(gates[i], r.velocities[i]);
    EXPECT_GE(c.speed, cone.v_min - 1e-9);
    EXPECT_LE(c.speed, cone.v_max + 1e-9);
    EXPECT_GE(c.yaw, cone.yaw_min - 1e-9);
    EXPECT_LE(c.yaw, cone.yaw_max + 1e-9);
    EXPECT_GE(c.pitch, cone.pitch_min - 1e-9);
    EXPECT_LE(c.pitch, cone.pitch_max + 1e-9);
  }
}

TEST(PlanRandom, SingleSamplePerGateIsChainedSegments) {
  BoundaryState start;
  start.p = Vec3(0, 0, 2);
  const std::vector<Gate> gates = three_gate_line();
  const ConeGrid cone;
  const AxisBoundsXyz u = default_bounds();

  // A single sample per gate leaves one chain; find a seed whose chain is
  // feasible (sampled velocities can land in a synchronization hole).
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    BoundaryState prev = start;
    double total = 0.0;
    bool feasible = true;
    for (std::size_t i = 0; i < gates.size() && feasible; ++i) {
      const std::vector<Vec3> sample =
          random_cone_samples(gates[i], cone, 1, derive_seed(seed, i));
      const BoundaryState next{gates[i].center, sample[0]};
      try {
        total += solve_segment(prev, next, u).duration;
      } catch (const Error&) {
        feasible = false;
      }
      prev = next;
    }
    if (!feasible) {
      EXPECT_THROW(plan_random(start, gates, cone, u, 1, seed), NoPathError);
      continue;
    }
    const VelocitySearchResult r = plan_random(start, gates, cone, u, 1, seed);
    EXPECT_DOUBLE_EQ(r.plan.total_time, total);
    EXPECT_EQ(r.edges_evaluated, edge_count_bound(1, gates.size(), 1));
    return;
  }
  FAIL() << "no feasible single-sample chain in 64 seeds";
}

TEST(PlanRandom, MoreSamplesNoWorseInExpectation) {
  BoundaryState start;
  start.p = Vec3(0, 0, 2);
  const std::vector<Gate> gates = three_gate_line();
  const AxisBoundsXyz u = default_bounds();
  double sum10 = 0.0;
  double sum150 = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    sum10 += plan_random(start, gates, ConeGrid{}, u, 10, seed).plan.total_time;
    sum150 += plan_random(start, gates, ConeGrid{}, u, 150, seed).plan.total_time;
  }
  EXPECT_LE(sum150 / 20.0, sum10 / 20.0 + 1e-9);
}

TEST(PlanRandom, DeterministicPlans) {
  BoundaryState start;
  start.p = Vec3(0, 0, 2);
  const std::vector<Gate> gates = three_gate_line();
  const VelocitySearchResult a =
      plan_random(start, gates, ConeGrid{}, default_bounds(), 40, 7);
  const VelocitySearchResult b =
      plan_random(start, gates, ConeGrid{}, default_bounds(), 40, 7);
  ASSERT_EQ(a.velocities.size(), b.velocities.size());
  for (std::size_t i = 0; i < a.velocities.size(); ++i) {
    EXPECT_EQ(a.velocities[i].x(), b.velocities[i].x());
    EXPECT_EQ(a.velocities[i].y(), b.velocities[i].y());
    EXPECT_EQ(a.velocities[i].z(), b.velocities[i].z());
  }
  EXPECT_EQ(a.plan.total_time, b.plan.total_time);
}

TEST(PlanRefocusing, NoGatesThrows) {
  EXPECT_THROW(plan_refocusing(BoundaryState{}, {}, ConeGrid{}, default_bounds()),
               NoPathError);
}

}  // namespace
}  // namespace replan
