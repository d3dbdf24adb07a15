#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <tuple>
#include <vector>

#include "replan/gate.hpp"
#include "replan/pmm_axis.hpp"
#include "replan/types.hpp"

namespace replan {

// Velocity sampling region around a gate's exit direction. Angles are
// measured in the gate frame; s is the number of samples per dimension.
struct ConeGrid {
  double v_min = 0.0;
  double v_max = 20.0;
  double yaw_min = -1.0471975511965976;   // -60 deg
  double yaw_max = 1.0471975511965976;    // +60 deg
  double pitch_min = -0.7853981633974483; // -45 deg
  double pitch_max = 0.7853981633974483;  // +45 deg
  int s = 3;

  bool valid() const {
    return v_min >= 0.0 && v_min <= v_max && yaw_min <= yaw_max &&
           pitch_min <= pitch_max && s >= 1;
  }
};

namespace detail {

// Inclusive linspace: s = 1 collapses to the midpoint, otherwise both
// endpoints are sampled.
inline double grid_coord(double lo, double hi, int s, int i) {
  if (s <= 1) return 0.5 * (lo + hi);
  return lo + static_cast<double>(i) * (hi - lo) / static_cast<double>(s - 1);
}

inline double grid_step(double lo, double hi, int s) {
  if (s <= 1) return 0.0;
  return (hi - lo) / static_cast<double>(s - 1);
}

}  // namespace detail

// s^3 evenly spaced velocities over (speed, yaw, pitch), speed-major order.
inline std::vector<Vec3> grid_samples(const Gate& gate, const ConeGrid& cone) {
  std::vector<Vec3> samples;
  samples.reserve(static_cast<std::size_t>(cone.s) * cone.s * cone.s);
  for (int l = 0; l < cone.s; ++l) {
    const double speed = detail::grid_coord(cone.v_min, cone.v_max, cone.s, l);
    for (int m = 0; m < cone.s; ++m) {
      const double yaw = detail::grid_coord(cone.yaw_min, cone.yaw_max, cone.s, m);
      for (int n = 0; n < cone.s; ++n) {
        const double pitch = detail::grid_coord(cone.pitch_min, cone.pitch_max, cone.s, n);
        samples.push_back(velocity_from_cone(gate, speed, yaw, pitch));
      }
    }
  }
  return samples;
}

// h i.i.d. uniform draws over the cone's (speed, yaw, pitch) box.
inline std::vector<Vec3> random_cone_samples(const Gate& gate, const ConeGrid& cone,
                                             int h, std::uint64_t rng_seed) {
  UniformRng rng(rng_seed);
  std::vector<Vec3> samples;
  samples.reserve(static_cast<std::size_t>(h));
  for (int i = 0; i < h; ++i) {
    const double speed = rng.uniform(cone.v_min, cone.v_max);
    const double yaw = rng.uniform(cone.yaw_min, cone.yaw_max);
    const double pitch = rng.uniform(cone.pitch_min, cone.pitch_max);
    samples.push_back(velocity_from_cone(gate, speed, yaw, pitch));
  }
  return samples;
}

// Worst-case number of segment solves for h samples/gate over H_g gates,
// repeated K times: (h + h^2 (H_g - 1)) * K.
inline std::uint64_t edge_count_bound(std::uint64_t h, std::uint64_t gates,
                                      std::uint64_t iterations) {
  return (h + h * h * (gates - 1)) * iterations;
}

// Chained synchronized segments through the chosen gate velocities.
struct PmmPlan {
  std::vector<PmmSegment> segments;
  std::vector<Vec3> gate_velocities;
  double total_time = 0.0;

  // Cumulative segment end times; entry i is the plan time at gate i.
  std::vector<double> gate_times() const {
    std::vector<double> times;
    times.reserve(segments.size());
    double t = 0.0;
    for (const auto& seg : segments) {
      t += seg.duration;
      times.push_back(t);
    }
    return times;
  }

  PmmSegment::State eval(double t) const {
    double acc = 0.0;
    for (const auto& seg : segments) {
      if (t <= acc + seg.duration || &seg == &segments.back()) {
        return seg.eval(std::clamp(t - acc, 0.0, seg.duration));
      }
      acc += seg.duration;
    }
    throw OutOfRangeError("PmmPlan::eval: empty plan");
  }
};

struct VelocitySearchResult {
  std::vector<Vec3> velocities;
  PmmPlan plan;
  std::uint64_t edges_evaluated = 0;
};

// Dijkstra over the layered velocity graph. Edge weights are minimum segment
// times, computed on node expansion when lazy is enabled so nodes that never
// leave the queue cost nothing. Ties break on (time, layer, node index).
inline VelocitySearchResult shortest_velocity_path(
    const BoundaryState& start, const std::vector<Vec3>& gate_positions,
    const std::vector<std::vector<Vec3>>& node_sets, const AxisBoundsXyz& u,
    bool lazy = true) {
  const std::size_t layers = gate_positions.size();
  if (layers == 0 || node_sets.size() != layers) {
    throw NoPathError("shortest_velocity_path: empty or mismatched gate layers");
  }
  for (const auto& nodes : node_sets) {
    if (nodes.empty()) throw NoPathError("shortest_velocity_path: gate with no velocity samples");
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::uint64_t edges = 0;

  const auto edge_time = [&](const Vec3& pa, const Vec3& va, const Vec3& pb,
                             const Vec3& vb) -> double {
    ++edges;
    try {
      return solve_segment(BoundaryState{pa, va}, BoundaryState{pb, vb}, u).duration;
    } catch (const Error&) {
      return kInf;
    }
  };

  std::vector<std::vector<double>> dist(layers);
  std::vector<std::vector<int>> parent(layers);
  for (std::size_t i = 0; i < layers; ++i) {
    dist[i].assign(node_sets[i].size(), kInf);
    parent[i].assign(node_sets[i].size(), -1);
  }

  if (!lazy) {
    // Layered DAG: forward relaxation visits every edge exactly once and is
    // equivalent to Dijkstra with all edges computed.
    for (std::size_t j = 0; j < node_sets[0].size(); ++j) {
      dist[0][j] = edge_time(start.p, start.v, gate_positions[0], node_sets[0][j]);
    }
    for (std::size_t i = 0; i + 1 < layers; ++i) {
      for (std::size_t a = 0; a < node_sets[i].size(); ++a) {
        for (std::size_t b = 0; b < node_sets[i + 1].size(); ++b) {
          const double w = edge_time(gate_positions[i], node_sets[i][a],
                                     gate_positions[i + 1], node_sets[i + 1][b]);
          const double d = dist[i][a] + w;
          if (d < dist[i + 1][b]) {
            dist[i + 1][b] = d;
            parent[i + 1][b] = static_cast<int>(a);
          }
        }
      }
    }
  } else {
    using Entry = std::tuple<double, std::size_t, std::size_t>;  // (dist, layer, node)
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue;
    for (std::size_t j = 0; j < node_sets[0].size(); ++j) {
      dist[0][j] = edge_time(start.p, start.v, gate_positions[0], node_sets[0][j]);
      if (dist[0][j] < kInf) queue.emplace(dist[0][j], 0, j);
    }
    std::vector<std::vector<char>> settled(layers);
    for (std::size_t i = 0; i < layers; ++i) settled[i].assign(node_sets[i].size(), 0);

    while (!queue.empty()) {
      const auto [d, i, a] = queue.top();
      queue.pop();
      if (settled[i][a] || d > dist[i][a]) continue;
      settled[i][a] = 1;
      if (i + 1 == layers) break;  // first settled final-layer node is optimal
      for (std::size_t b = 0; b < node_sets[i + 1].size(); ++b) {
        const double w = edge_time(gate_positions[i], node_sets[i][a],
                                   gate_positions[i + 1], node_sets[i + 1][b]);
        const double nd = d + w;
        if (nd < dist[i + 1][b]) {
          dist[i + 1][b] = nd;
          parent[i + 1][b] = static_cast<int>(a);
          queue.emplace(nd, i + 1, b);
        }
      }
    }
  }

  std::size_t best = 0;
  double best_time = kInf;
  for (std::size_t j = 0; j < node_sets[layers - 1].size(); ++j) {
    if (dist[layers - 1][j] < best_time) {
      best_time = dist[layers - 1][j];
      best = j;
    }
  }
  if (!(best_time < kInf)) {
    throw NoPathError("shortest_velocity_path: no feasible velocity chain");
  }

  std::vector<int> chain(layers);
  chain[layers - 1] = static_cast<int>(best);
  for (std::size_t i = layers - 1; i > 0; --i) {
    chain[i - 1] = parent[i][chain[i]];
  }

  VelocitySearchResult result;
  result.edges_evaluated = edges;
  result.velocities.reserve(layers);
  for (std::size_t i = 0; i < layers; ++i) {
    result.velocities.push_back(node_sets[i][chain[i]]);
  }
  BoundaryState prev = start;
  for (std::size_t i = 0; i < layers; ++i) {
    const BoundaryState next{gate_positions[i], result.velocities[i]};
    result.plan.segments.push_back(solve_segment(prev, next, u));
    result.plan.total_time += result.plan.segments.back().duration;
    prev = next;
  }
  result.plan.gate_velocities = result.velocities;
  return result;
}

struct RefocusOptions {
  double eps = 0.99;   // converged when T_k > eps * T_{k-1}
  int max_iter = 10;
  bool lazy = true;
};

struct RefocusResult {
  PmmPlan plan;
  std::vector<Vec3> velocities;
  std::vector<double> iteration_times;  // best-so-far after each iteration
  std::vector<double> raw_times;        // per-iteration search results
  std::uint64_t edges_evaluated = 0;
  int iterations = 0;
  bool converged = false;
};

// Shrinks the cone around the optimum: the new half-width per dimension is
// half the previous sample step, so step sizes contract by a factor of s - 1
// per iteration, and the result is clamped inside the current cone.
inline ConeGrid refocus_cone(const ConeGrid& cone, const Vec3& optimum, const Gate& gate) {
  const ConeCoords c = cone_coords_of(gate, optimum);
  ConeGrid next = cone;
  const auto shrink = [](double lo, double hi, int s, double center, double& out_lo,
                         double& out_hi) {
    const double half = 0.5 * detail::grid_step(lo, hi, s);
    out_lo = std::max(lo, center - half);
    out_hi = std::min(hi, center + half);
  };
  shrink(cone.v_min, cone.v_max, cone.s, c.speed, next.v_min, next.v_max);
  shrink(cone.yaw_min, cone.yaw_max, cone.s, c.yaw, next.yaw_min, next.yaw_max);
  shrink(cone.pitch_min, cone.pitch_max, cone.s, c.pitch, next.pitch_min, next.pitch_max);
  return next;
}

// Iterated grid search with per-gate cone refocusing. Stops when an iteration
// improves the minimum time by less than (1 - eps), keeping the best plan seen.
inline RefocusResult plan_refocusing(const BoundaryState& start,
                                     const std::vector<Gate>& gates,
                                     const ConeGrid& initial_cone, const AxisBoundsXyz& u,
                                     const RefocusOptions& opts = {}) {
  if (gates.empty()) throw NoPathError("plan_refocusing: no gates");
  if (!(opts.eps > 0.0 && opts.eps < 1.0)) {
    throw Error("plan_refocusing: eps must lie in (0, 1)");
  }
  std::vector<Vec3> positions;
  positions.reserve(gates.size());
  for (const auto& g : gates) positions.push_back(g.center);

  std::vector<ConeGrid> cones(gates.size(), initial_cone);
  RefocusResult result;
  double best_time = std::numeric_limits<double>::infinity();
  double prev_raw = std::numeric_limits<double>::infinity();

  for (int k = 0; k < opts.max_iter; ++k) {
    std::vector<std::vector<Vec3>> node_sets;
    node_sets.reserve(gates.size());
    for (std::size_t i = 0; i < gates.size(); ++i) {
      node_sets.push_back(grid_samples(gates[i], cones[i]));
    }
    VelocitySearchResult search =
        shortest_velocity_path(start, positions, node_sets, u, opts.lazy);
    result.edges_evaluated += search.edges_evaluated;
    result.iterations = k + 1;

    const double raw = search.plan.total_time;
    result.raw_times.push_back(raw);
    if (raw < best_time) {
      best_time = raw;
      result.plan = std::move(search.plan);
      result.velocities = std::move(search.velocities);
    }
    result.iteration_times.push_back(best_time);

    if (k > 0 && (raw > opts.eps * prev_raw || prev_raw <= kFeasTol)) {
      result.converged = true;
      break;
    }
    prev_raw = raw;
    for (std::size_t i = 0; i < gates.size(); ++i) {
      cones[i] = refocus_cone(cones[i], result.velocities[i], gates[i]);
    }
  }
  return result;
}

// Single-pass random-cone search; the fixed-reference strategy.
inline VelocitySearchResult plan_random(const BoundaryState& start,
                                        const std::vector<Gate>& gates,
                                        const ConeGrid& cone, const AxisBoundsXyz& u,
                                        int h, std::uint64_t rng_seed, bool lazy = true) {
  if (gates.empty()) throw NoPathError("plan_random: no gates");
  std::vector<Vec3> positions;
  std::vector<std::vector<Vec3>> node_sets;
  positions.reserve(gates.size());
  node_sets.reserve(gates.size());
  for (std::size_t i = 0; i < gates.size(); ++i) {
    positions.push_back(gates[i].center);
    node_sets.push_back(random_cone_samples(gates[i], cone, h, derive_seed(rng_seed, i)));
  }
  return shortest_velocity_path(start, positions, node_sets, u, lazy);
}

}  // namespace replan
