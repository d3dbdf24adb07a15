#pragma once

#include <array>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "replan/path.hpp"
#include "replan/scenario.hpp"
#include "replan/sim.hpp"
#include "replan/tracker.hpp"
#include "replan/velocity_graph.hpp"

namespace replan {

enum class PlanMode { kFixedReference, kReplanning };
enum class Strategy { kRandom, kRefocus };

enum class EpisodeOutcome { kCompleted, kTimeout, kNonFinite, kNoPath };

inline const char* to_string(EpisodeOutcome o) {
  switch (o) {
    case EpisodeOutcome::kCompleted: return "completed";
    case EpisodeOutcome::kTimeout: return "timeout";
    case EpisodeOutcome::kNonFinite: return "non_finite";
    case EpisodeOutcome::kNoPath: return "no_path";
  }
  return "unknown";
}

struct GatePassRecord {
  int gate_id = 0;
  int lap = 0;
  double time = 0.0;
  double deviation = 0.0;
  bool hit = false;
};

struct TickLog {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  double theta = 0.0;
  double v_theta = 0.0;
  double e_c_norm = 0.0;
  double e_l_norm = 0.0;
  std::array<double, 4> thrusts{};
  bool saturated = false;
  Vec3 wind = Vec3::Zero();
  int gate_event = -1;  // gate id passed during this tick, -1 otherwise
};

struct EpisodeMetrics {
  double lap_time = 0.0;
  double avg_contour_error = 0.0;
  double avg_plan_start_contour_error = 0.0;
  double avg_progress_rate = 0.0;
  double max_gate_deviation = 0.0;
  int gates_passed = 0;
  int gates_missed = 0;
  std::uint64_t replans = 0;
  std::uint64_t planning_edges = 0;
};

struct EpisodeResult {
  EpisodeOutcome outcome = EpisodeOutcome::kTimeout;
  EpisodeMetrics metrics;
  std::vector<GatePassRecord> gate_passes;
  std::vector<TickLog> ticks;
  std::string error;
};

namespace detail {

// Latest-published reference path; the planner replaces whole snapshots and
// the control loop reads whichever one is current.
class PathBuffer {
 public:
  void publish(std::shared_ptr<const Path> path) {
    std::lock_guard lock(mutex_);
    path_ = std::move(path);
    ++generation_;
  }

  std::pair<std::shared_ptr<const Path>, std::uint64_t> snapshot() const {
    std::lock_guard lock(mutex_);
    return {path_, generation_};
  }

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const Path> path_;
  std::uint64_t generation_ = 0;
};

struct PlanRequest {
  BoundaryState state;
  double t = 0.0;
  std::size_t target_index = 0;
  std::uint64_t tick = 0;
};

}  // namespace detail

// Closed-loop run: plan, track with the contouring controller cascaded to
// rotor thrusts, integrate the rigid body, detect gate passes. Fixed mode
// plans once through every gate; replanning mode re-plans over the next
// gate_horizon gates every replan_every control ticks.
inline EpisodeResult run_episode(const Scenario& scenario, PlanMode mode,
                                 std::uint64_t seed,
                                 std::optional<Strategy> strategy_override = std::nullopt,
                                 bool collect_ticks = true) {
  EpisodeResult result;
  if (!scenario.valid()) {
    result.outcome = EpisodeOutcome::kNoPath;
    result.error = "invalid scenario";
    return result;
  }
  const Strategy strategy = strategy_override.value_or(
      mode == PlanMode::kFixedReference ? Strategy::kRandom : Strategy::kRefocus);

  const double dt_ctrl = 1.0 / static_cast<double>(scenario.control_hz);
  const int substeps = std::max(1, static_cast<int>(std::lround(dt_ctrl / scenario.sim_dt)));
  const double dt_sim = dt_ctrl / substeps;
  const SimEnv env{scenario.wind};
  // Plane crossings further out than this are other parts of the track, not
  // attempts at the gate.
  const auto capture_radius = [](const Gate& g) { return g.pass_radius + 2.5; };

  const auto plan_once = [&](const BoundaryState& from, const std::vector<Gate>& gates,
                             std::uint64_t plan_seed,
                             std::uint64_t& edges) -> PmmPlan {
    if (strategy == Strategy::kRefocus) {
      RefocusResult r = plan_refocusing(from, gates, scenario.cone, scenario.pmm_bounds);
      edges += r.edges_evaluated;
      return std::move(r.plan);
    }
    VelocitySearchResult r = plan_random(from, gates, scenario.cone, scenario.pmm_bounds,
                                         scenario.h_random, plan_seed);
    edges += r.edges_evaluated;
    return std::move(r.plan);
  };

  QuadState state;
  state.p = scenario.start.p;
  state.v = scenario.start.v;

  detail::PathBuffer path_buffer;
  std::size_t target_index = 0;
  const std::size_t total_targets = scenario.total_targets();

  double plan_start_error_sum = 0.0;
  std::uint64_t plan_count = 0;

  const auto publish_plan = [&](const PmmPlan& plan, const Vec3& current_pos) {
    auto path = std::make_shared<const Path>(assemble_path(plan));
    const ContourErrors e =
        project_progress(*path, current_pos, 0.0, scenario.tracker.projection_window);
    plan_start_error_sum += e.e_c.norm();
    ++plan_count;
    path_buffer.publish(std::move(path));
  };

  try {
    const std::vector<Gate> initial_gates =
        mode == PlanMode::kFixedReference ? scenario.all_target_gates(0.0)
                                          : scenario.horizon_gates(0, 0.0);
    const PmmPlan initial_plan =
        plan_once(scenario.start, initial_gates, seed, result.metrics.planning_edges);
    publish_plan(initial_plan, state.p);
    result.metrics.replans = 0;
  } catch (const NoPathError& e) {
    result.outcome = EpisodeOutcome::kNoPath;
    result.error = e.what();
    return result;
  } catch (const Error& e) {
    result.outcome = EpisodeOutcome::kNoPath;
    result.error = e.what();
    return result;
  }

  // Optional asynchronous planner; the control loop never blocks on it.
  struct AsyncPlanner {
    std::thread worker;
    std::mutex mutex;
    std::condition_variable cv;
    std::optional<detail::PlanRequest> pending;
    bool stop = false;

    ~AsyncPlanner() {
      {
        std::lock_guard lock(mutex);
        stop = true;
      }
      cv.notify_all();
      if (worker.joinable()) worker.join();
    }
  };
  std::unique_ptr<AsyncPlanner> async;
  const bool replanning = mode == PlanMode::kReplanning;
  if (replanning && !scenario.deterministic) {
    async = std::make_unique<AsyncPlanner>();
    async->worker = std::thread([&, planner = async.get()]() {
      while (true) {
        detail::PlanRequest req;
        {
          std::unique_lock lock(planner->mutex);
          planner->cv.wait(lock, [&] { return planner->stop || planner->pending.has_value(); });
          if (planner->stop) return;
          req = *planner->pending;
          planner->pending.reset();
        }
        try {
          const std::vector<Gate> gates = scenario.horizon_gates(req.target_index, req.t);
          if (gates.empty()) continue;
          std::uint64_t edges = 0;
          const PmmPlan plan = plan_once(req.state, gates, derive_seed(seed, req.tick), edges);
          publish_plan(plan, req.state.p);
        } catch (const Error&) {
          // Keep tracking the previous snapshot; the next request may succeed.
        }
      }
    });
  }

  TrackerState tracker_state;
  {
    const std::shared_ptr<const Path> path = path_buffer.snapshot().first;
    const ContourErrors e =
        project_progress(*path, state.p, 0.0, scenario.tracker.projection_window);
    tracker_state.theta = e.theta_star;
    const PointOnPath pt = path->point_at(e.theta_star);
    tracker_state.v_theta =
        std::clamp(state.v.dot(pt.tangent), 0.0, scenario.tracker.v_theta_max);
  }

  double contour_sum = 0.0;
  double progress_sum = 0.0;
  std::uint64_t tick_count = 0;
  double t = 0.0;
  bool done = false;

  const std::uint64_t max_ticks =
      static_cast<std::uint64_t>(std::ceil(scenario.timeout / dt_ctrl)) + 1;

  try {
    for (std::uint64_t tick = 0; !done; ++tick) {
      if (t >= scenario.timeout || tick >= max_ticks) {
        result.outcome = EpisodeOutcome::kTimeout;
        break;
      }

      if (replanning && tick > 0 && tick % scenario.replan_every == 0 &&
          target_index < total_targets) {
        if (scenario.deterministic) {
          const std::vector<Gate> gates = scenario.horizon_gates(target_index, t);
          if (!gates.empty()) {
            try {
              const PmmPlan plan = plan_once(BoundaryState{state.p, state.v}, gates,
                                             derive_seed(seed, tick),
                                             result.metrics.planning_edges);
              publish_plan(plan, state.p);
              ++result.metrics.replans;
            } catch (const Error&) {
              // Keep tracking the previous snapshot.
            }
          }
        } else {
          std::lock_guard lock(async->mutex);
          async->pending = detail::PlanRequest{BoundaryState{state.p, state.v}, t,
                                               target_index, tick};
          async->cv.notify_one();
          ++result.metrics.replans;
        }
      }

      const std::shared_ptr<const Path> path = path_buffer.snapshot().first;
      const double guess = tracker_state.theta + tracker_state.v_theta * dt_ctrl;
      const ContourErrors proj =
          project_progress(*path, state.p, guess, scenario.tracker.projection_window);
      tracker_state.theta = proj.theta_star;

      Vec3 accel_cmd = tracker_state.last_accel;
      ContouringSolution solution;
      bool solved = false;
      try {
        solution = solve_contouring(state.p, state.v, tracker_state, *path,
                                    scenario.tracker, scenario.quad);
        accel_cmd = solution.accel;
        solved = true;
      } catch (const SolverDivergedError&) {
        // Fall back to the previous command for this tick.
      }
      if (solved) {
        TrackerState next = std::move(solution.next_state);
        next.theta = tracker_state.theta;
        // The horizon step is longer than the control period; advance the
        // carried progress rate by the fraction actually elapsed.
        if (!next.warm_dvs.empty()) {
          next.v_theta = std::clamp(
              tracker_state.v_theta + next.warm_dvs[0] * (dt_ctrl / scenario.tracker.dt),
              0.0, scenario.tracker.v_theta_max);
        }
        tracker_state = std::move(next);
      }

      const CascadeResult cascade_out = cascade(accel_cmd, state, scenario.quad,
                                                scenario.gains);

      TickLog log;
      if (collect_ticks) {
        log.t = t;
        log.p = state.p;
        log.v = state.v;
        log.theta = tracker_state.theta;
        log.v_theta = tracker_state.v_theta;
        log.e_c_norm = proj.e_c.norm();
        log.e_l_norm = proj.e_l.norm();
        log.thrusts = cascade_out.cmd.f;
        log.saturated = cascade_out.saturated;
        log.wind = wind_force(state.p, t, env);
      }
      contour_sum += proj.e_c.norm();
      progress_sum += tracker_state.v_theta;
      ++tick_count;

      for (int sub = 0; sub < substeps && !done; ++sub) {
        const Vec3 p_prev = state.p;
        state = step_rk4(state, cascade_out.cmd, scenario.quad, env, t, dt_sim);
        t += dt_sim;
        if (target_index >= total_targets) continue;
        const Gate gate_now = gate_at(scenario.target_gate(target_index), t);
        const auto event = detect_gate_pass(p_prev, state.p, gate_now, t - dt_sim, dt_sim);
        if (event && event->deviation <= capture_radius(gate_now)) {
          GatePassRecord record;
          record.gate_id = gate_now.id;
          record.lap = static_cast<int>(target_index / scenario.track.size());
          record.time = event->time;
          record.deviation = event->deviation;
          record.hit = event->within_radius;
          result.gate_passes.push_back(record);
          result.metrics.max_gate_deviation =
              std::max(result.metrics.max_gate_deviation, event->deviation);
          if (record.hit) {
            ++result.metrics.gates_passed;
          } else {
            ++result.metrics.gates_missed;
          }
          if (collect_ticks) log.gate_event = gate_now.id;
          ++target_index;
          if (target_index == total_targets) {
            result.outcome = EpisodeOutcome::kCompleted;
            result.metrics.lap_time = event->time;
            done = true;
          }
        }
      }
      if (collect_ticks) result.ticks.push_back(log);
    }
  } catch (const NonFiniteError& e) {
    result.outcome = EpisodeOutcome::kNonFinite;
    result.error = e.what();
  } catch (const NoPathError& e) {
    result.outcome = EpisodeOutcome::kNoPath;
    result.error = e.what();
  }

  // Join the planner thread before reading anything it may touch.
  async.reset();

  if (result.outcome != EpisodeOutcome::kCompleted && result.metrics.lap_time == 0.0) {
    result.metrics.lap_time = t;
  }
  if (tick_count > 0) {
    result.metrics.avg_contour_error = contour_sum / static_cast<double>(tick_count);
    result.metrics.avg_progress_rate = progress_sum / static_cast<double>(tick_count);
  }
  if (plan_count > 0) {
    result.metrics.avg_plan_start_contour_error =
        plan_start_error_sum / static_cast<double>(plan_count);
  }
  return result;
}

inline void write_episode_csv(const EpisodeResult& result, std::ostream& os) {
  os << "t,px,py,pz,vx,vy,vz,theta,v_theta,e_c,e_l,f1,f2,f3,f4,saturated,"
        "wind_x,wind_y,wind_z,gate_event\n";
  char line[512];
  for (const auto& k : result.ticks) {
    std::snprintf(line, sizeof(line),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g,%.17g,%d\n",
                  k.t, k.p.x(), k.p.y(), k.p.z(), k.v.x(), k.v.y(), k.v.z(), k.theta,
                  k.v_theta, k.e_c_norm, k.e_l_norm, k.thrusts[0], k.thrusts[1],
                  k.thrusts[2], k.thrusts[3], k.saturated ? 1 : 0, k.wind.x(),
                  k.wind.y(), k.wind.z(), k.gate_event);
    os << line;
  }
}

}  // namespace replan
