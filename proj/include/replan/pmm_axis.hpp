#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "replan/types.hpp"

namespace replan {

// Roots of the switching-time quadratic within feas_tol of zero are
// boundary-exact cases; clamp them instead of rejecting.
inline constexpr double kFeasTol = 1e-9;
inline constexpr double kEvalTol = 1e-9;
inline constexpr double kOrderTieTol = 1e-12;

enum class SwitchOrder { kLoThenHi, kHiThenLo };

struct AxisBoundary {
  double p0 = 0.0;
  double v0 = 0.0;
  double p2 = 0.0;
  double v2 = 0.0;
};

// Per-axis acceleration box; u_lo < 0 < u_hi.
struct AxisBounds {
  double u_lo = -1.0;
  double u_hi = 1.0;

  bool valid() const {
    return std::isfinite(u_lo) && std::isfinite(u_hi) && u_lo < 0.0 && 0.0 < u_hi;
  }
};

struct AxisState {
  double p = 0.0;
  double v = 0.0;
  double a = 0.0;
};

// Two-segment constant-acceleration profile: a1 for t in [0, t1], then a2
// until t1 + t2. The switch state (p1, v1) is implied by segment one.
struct AxisBangBang {
  SwitchOrder order = SwitchOrder::kHiThenLo;
  double t1 = 0.0;
  double t2 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  AxisBoundary boundary;

  double total_time() const { return t1 + t2; }

  double switch_velocity() const { return boundary.v0 + a1 * t1; }

  double switch_position() const {
    return boundary.p0 + boundary.v0 * t1 + 0.5 * a1 * t1 * t1;
  }
};

struct SyncResult {
  AxisBangBang traj;
  double alpha = 1.0;
};

namespace detail {

// Stable real roots of c2 x^2 + c1 x + c0 = 0. Falls back to the linear root
// when the leading coefficient vanishes.
inline int solve_quadratic(double c2, double c1, double c0,
                           std::array<double, 2>& roots) {
  if (std::abs(c2) < 1e-300) {
    if (std::abs(c1) < 1e-300) return 0;
    roots[0] = -c0 / c1;
    return 1;
  }
  const double disc = c1 * c1 - 4.0 * c2 * c0;
  if (disc < 0.0) return 0;
  const double sq = std::sqrt(disc);
  const double q = -0.5 * (c1 + (c1 >= 0.0 ? sq : -sq));
  roots[0] = q / c2;
  if (std::abs(q) < 1e-300) {
    roots[1] = 0.0;
    return roots[0] == 0.0 ? 1 : 2;
  }
  roots[1] = c0 / q;
  return 2;
}

struct AxisCandidate {
  SwitchOrder order;
  double t1;
  double t2;
  double a1;
  double a2;
};

// For a fixed (a1, a2) ordering, eliminating (p1, v1) from the two-segment
// motion equations leaves a quadratic in t1:
//   0.5 a1 (a2 - a1) t1^2 + v0 (a2 - a1) t1 + v0 dv + 0.5 dv^2 - a2 dp = 0
// with dv = v2 - v0, dp = p2 - p0. t2 follows from the velocity chain.
inline void collect_order_candidates(const AxisBoundary& b, double a1, double a2,
                                     SwitchOrder order,
                                     std::array<AxisCandidate, 4>& out,
                                     int& count) {
  const double dv = b.v2 - b.v0;
  const double dp = b.p2 - b.p0;
  const double c2 = 0.5 * a1 * (a2 - a1);
  const double c1 = b.v0 * (a2 - a1);
  const double c0 = b.v0 * dv + 0.5 * dv * dv - a2 * dp;
  std::array<double, 2> roots{};
  const int n = solve_quadratic(c2, c1, c0, roots);
  for (int i = 0; i < n; ++i) {
    double t1 = roots[i];
    if (!(std::isfinite(t1)) || t1 < -kFeasTol) continue;
    t1 = std::max(t1, 0.0);
    double t2 = (dv - a1 * t1) / a2;
    if (!(std::isfinite(t2)) || t2 < -kFeasTol) continue;
    t2 = std::max(t2, 0.0);
    out[count++] = AxisCandidate{order, t1, t2, a1, a2};
  }
}

}  // namespace detail

// Minimum-time single-axis profile between boundary states under the
// acceleration box, considering both switch orders. Ties within 1e-12 prefer
// HiThenLo so downstream searches are reproducible.
inline AxisBangBang solve_axis_min_time(const AxisBoundary& b, const AxisBounds& u) {
  std::array<detail::AxisCandidate, 4> cands{};
  int n = 0;
  detail::collect_order_candidates(b, u.u_hi, u.u_lo, SwitchOrder::kHiThenLo, cands, n);
  detail::collect_order_candidates(b, u.u_lo, u.u_hi, SwitchOrder::kLoThenHi, cands, n);
  if (n == 0) {
    throw InfeasibleError("solve_axis_min_time: no nonnegative switching solution");
  }
  int best = -1;
  for (int i = 0; i < n; ++i) {
    if (best < 0) {
      best = i;
      continue;
    }
    const double ti = cands[i].t1 + cands[i].t2;
    const double tb = cands[best].t1 + cands[best].t2;
    if (ti < tb - kOrderTieTol) {
      best = i;
    } else if (std::abs(ti - tb) <= kOrderTieTol &&
               cands[best].order == SwitchOrder::kLoThenHi &&
               cands[i].order == SwitchOrder::kHiThenLo) {
      best = i;
    }
  }
  const auto& c = cands[best];
  return AxisBangBang{c.order, c.t1, c.t2, c.a1, c.a2, b};
}

// Piecewise constant-acceleration kinematics at time t in [0, t1 + t2].
inline AxisState evaluate_axis(const AxisBangBang& traj, double t) {
  const double total = traj.total_time();
  if (t < -kEvalTol || t > total + kEvalTol) {
    throw OutOfRangeError("evaluate_axis: t=" + std::to_string(t) +
                          " outside [0, " + std::to_string(total) + "]");
  }
  t = std::clamp(t, 0.0, total);
  if (t <= traj.t1) {
    const double p = traj.boundary.p0 + traj.boundary.v0 * t + 0.5 * traj.a1 * t * t;
    const double v = traj.boundary.v0 + traj.a1 * t;
    return AxisState{p, v, traj.a1};
  }
  const double p1 = traj.switch_position();
  const double v1 = traj.switch_velocity();
  const double s = t - traj.t1;
  const double p = p1 + v1 * s + 0.5 * traj.a2 * s * s;
  const double v = v1 + traj.a2 * s;
  return AxisState{p, v, traj.a2};
}

// Stretches the axis profile to a requested total duration by scaling the
// acceleration bounds with a factor alpha in (0, 1]. Augmenting the motion
// equations with t1 + t2 = T leaves a quadratic in alpha per ordering:
//   a1 a2 T^2 alpha^2 + 2 ((a1 - a2) E - a1 T dv) alpha + dv^2 = 0
// with E = dp - v0 T. Among valid roots the largest alpha wins.
inline SyncResult scale_axis_to_duration(const AxisBoundary& b, const AxisBounds& u,
                                         double t_total) {
  const AxisBangBang min_traj = solve_axis_min_time(b, u);
  const double t_min = min_traj.total_time();
  if (t_total < t_min - kFeasTol) {
    throw InfeasibleDurationError(
        "scale_axis_to_duration: requested " + std::to_string(t_total) +
        " s below axis minimum " + std::to_string(t_min) + " s");
  }
  if (std::abs(t_total - t_min) <= kFeasTol) {
    return SyncResult{min_traj, 1.0};
  }

  const double dv = b.v2 - b.v0;
  const double dp = b.p2 - b.p0;
  const double coast_residual = dp - b.v0 * t_total;
  if (std::abs(dv) <= kFeasTol && std::abs(coast_residual) <= kFeasTol) {
    // No acceleration needed; alpha has no unique value, report a zero-input
    // profile spanning the requested duration.
    AxisBangBang traj;
    traj.order = SwitchOrder::kHiThenLo;
    traj.t1 = 0.5 * t_total;
    traj.t2 = t_total - traj.t1;
    traj.a1 = 0.0;
    traj.a2 = 0.0;
    traj.boundary = b;
    return SyncResult{traj, 1.0};
  }

  struct ScaledCandidate {
    double alpha;
    SwitchOrder order;
    double t1;
    double t2;
    double a1;
    double a2;
  };
  std::optional<ScaledCandidate> best;

  const auto consider_order = [&](double a1, double a2, SwitchOrder order) {
    const double energy = dp - b.v0 * t_total;
    const double qa = a1 * a2 * t_total * t_total;
    const double qb = 2.0 * ((a1 - a2) * energy - a1 * t_total * dv);
    const double qc = dv * dv;
    std::array<double, 2> roots{};
    const int n = detail::solve_quadratic(qa, qb, qc, roots);
    for (int i = 0; i < n; ++i) {
      const double alpha = roots[i];
      if (!std::isfinite(alpha) || alpha <= 1e-12 || alpha > 1.0 + kFeasTol) continue;
      double t1 = (dv - alpha * a2 * t_total) / (alpha * (a1 - a2));
      if (!std::isfinite(t1) || t1 < -kFeasTol || t1 > t_total + kFeasTol) continue;
      t1 = std::clamp(t1, 0.0, t_total);
      // Only the slowed-down minimal branch counts: under the scaled bounds,
      // the requested duration must be this boundary's minimum time. Other
      // roots are overshoot profiles that merely pass through the states.
      const double t_check =
          solve_axis_min_time(b, AxisBounds{alpha * u.u_lo, alpha * u.u_hi})
              .total_time();
      if (std::abs(t_check - t_total) > 1e-7 * (1.0 + t_total)) continue;
      const ScaledCandidate cand{std::min(alpha, 1.0), order, t1, t_total - t1,
                                 alpha * a1, alpha * a2};
      if (!best || cand.alpha > best->alpha + kOrderTieTol ||
          (std::abs(cand.alpha - best->alpha) <= kOrderTieTol &&
           best->order == SwitchOrder::kLoThenHi &&
           order == SwitchOrder::kHiThenLo)) {
        best = cand;
      }
    }
  };
  consider_order(u.u_hi, u.u_lo, SwitchOrder::kHiThenLo);
  consider_order(u.u_lo, u.u_hi, SwitchOrder::kLoThenHi);

  if (!best) {
    // The alpha-scaled two-phase family cannot realize every duration above
    // the minimum; the reachable set can have a hole when the boundary asks
    // for hard braking. Surface it rather than returning a wrong profile.
    throw NoConvergenceError(
        "scale_axis_to_duration: no alpha in (0, 1] reaches T=" +
        std::to_string(t_total) + " s (axis min " + std::to_string(t_min) + " s)");
  }
  AxisBangBang traj;
  traj.order = best->order;
  traj.t1 = best->t1;
  traj.t2 = best->t2;
  traj.a1 = best->a1;
  traj.a2 = best->a2;
  traj.boundary = b;
  return SyncResult{traj, best->alpha};
}

// Synchronized three-axis segment: every axis spans the same duration, the
// slowest axis at full bounds and the others slowed via alpha scaling.
struct PmmSegment {
  std::array<AxisBangBang, 3> axes;
  std::array<double, 3> alpha{1.0, 1.0, 1.0};
  double duration = 0.0;

  Vec3 start_position() const {
    return Vec3(axes[0].boundary.p0, axes[1].boundary.p0, axes[2].boundary.p0);
  }
  Vec3 start_velocity() const {
    return Vec3(axes[0].boundary.v0, axes[1].boundary.v0, axes[2].boundary.v0);
  }
  Vec3 end_position() const {
    return Vec3(axes[0].boundary.p2, axes[1].boundary.p2, axes[2].boundary.p2);
  }
  Vec3 end_velocity() const {
    return Vec3(axes[0].boundary.v2, axes[1].boundary.v2, axes[2].boundary.v2);
  }

  struct State {
    Vec3 p;
    Vec3 v;
    Vec3 a;
  };

  State eval(double t) const {
    State s;
    for (int i = 0; i < 3; ++i) {
      const AxisState x = evaluate_axis(axes[i], t);
      s.p[i] = x.p;
      s.v[i] = x.v;
      s.a[i] = x.a;
    }
    return s;
  }
};

struct BoundaryState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};

using AxisBoundsXyz = std::array<AxisBounds, 3>;

// Per-axis minimum times, then the slowest axis sets T* and the others are
// stretched to it.
inline PmmSegment solve_segment(const BoundaryState& start, const BoundaryState& end,
                                const AxisBoundsXyz& u) {
  static constexpr const char* kAxisNames[3] = {"x", "y", "z"};
  std::array<AxisBoundary, 3> bounds;
  std::array<double, 3> min_times{};
  for (int i = 0; i < 3; ++i) {
    bounds[i] = AxisBoundary{start.p[i], start.v[i], end.p[i], end.v[i]};
    try {
      min_times[i] = solve_axis_min_time(bounds[i], u[i]).total_time();
    } catch (const Error& e) {
      throw InfeasibleError(std::string("solve_segment: axis ") + kAxisNames[i] +
                            ": " + e.what());
    }
  }
  const double t_star = std::max({min_times[0], min_times[1], min_times[2]});
  PmmSegment seg;
  seg.duration = t_star;
  for (int i = 0; i < 3; ++i) {
    try {
      SyncResult sync = scale_axis_to_duration(bounds[i], u[i], t_star);
      seg.axes[i] = sync.traj;
      seg.alpha[i] = sync.alpha;
    } catch (const Error& e) {
      throw NoConvergenceError(std::string("solve_segment: axis ") + kAxisNames[i] +
                               ": " + e.what());
    }
  }
  return seg;
}

}  // namespace replan
