#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "replan/gate.hpp"
#include "replan/quad.hpp"
#include "replan/types.hpp"

namespace replan {

// Axis-aligned constant-force region. Boxes are closed: boundary points are
// inside.
struct WindRegion {
  Vec3 box_min = Vec3::Zero();
  Vec3 box_max = Vec3::Zero();
  Vec3 force = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= box_min.array()).all() && (p.array() <= box_max.array()).all();
  }
};

struct SimEnv {
  std::vector<WindRegion> wind;
};

inline Vec3 wind_force(const Vec3& p, double /*t*/, const SimEnv& env) {
  Vec3 f = Vec3::Zero();
  for (const auto& region : env.wind) {
    if (region.contains(p)) f += region.force;
  }
  return f;
}

struct QuadDeriv {
  Vec3 dp;
  Eigen::Vector4d dq;  // (w, x, y, z) order
  Vec3 dv;
  Vec3 dw;
};

// Rigid-body derivative with rotor mixing, linear drag in the body frame and
// an external force:
//   p' = v
//   q' = 1/2 q (0, w)
//   v' = g + R f_T / m - R D R^T v + f_ext / m
//   w' = J^-1 (tau - w x J w)
inline QuadDeriv deriv(const QuadState& state, const RotorCommand& cmd,
                       const QuadParams& params, const Vec3& external_force) {
  double thrust = 0.0;
  Vec3 torque;
  rotor_mix(cmd, params, thrust, torque);

  const Eigen::Matrix3d rot = state.q.toRotationMatrix();

  QuadDeriv d;
  d.dp = state.v;

  const Quat omega_quat(0.0, state.w.x(), state.w.y(), state.w.z());
  const Quat qdot = state.q * omega_quat;
  d.dq = 0.5 * Eigen::Vector4d(qdot.w(), qdot.x(), qdot.y(), qdot.z());

  d.dv = params.gravity + (thrust / params.mass) * rot.col(2) -
         rot * params.drag.cwiseProduct(rot.transpose() * state.v) / params.mass +
         external_force / params.mass;

  const Vec3 j_w = params.inertia.cwiseProduct(state.w);
  d.dw = (torque - state.w.cross(j_w)).cwiseQuotient(params.inertia);
  return d;
}

namespace detail {

struct StateVec {
  Vec3 p;
  Eigen::Vector4d q;
  Vec3 v;
  Vec3 w;

  static StateVec from(const QuadState& s) {
    return StateVec{s.p, Eigen::Vector4d(s.q.w(), s.q.x(), s.q.y(), s.q.z()), s.v, s.w};
  }

  QuadState to() const {
    QuadState s;
    s.p = p;
    s.q = Quat(q[0], q[1], q[2], q[3]);
    s.v = v;
    s.w = w;
    return s;
  }

  StateVec add_scaled(const QuadDeriv& d, double h) const {
    return StateVec{p + h * d.dp, q + h * d.dq, v + h * d.dv, w + h * d.dw};
  }
};

}  // namespace detail

// Classical RK4 step with the wind force sampled at each stage position and
// quaternion renormalization at the end.
inline QuadState step_rk4(const QuadState& state, const RotorCommand& cmd,
                          const QuadParams& params, const SimEnv& env, double t,
                          double dt) {
  const auto eval = [&](const detail::StateVec& sv, double stage_t) {
    const QuadState qs = sv.to();
    return deriv(qs, cmd, params, wind_force(qs.p, stage_t, env));
  };

  const detail::StateVec s0 = detail::StateVec::from(state);
  const QuadDeriv k1 = eval(s0, t);
  const QuadDeriv k2 = eval(s0.add_scaled(k1, 0.5 * dt), t + 0.5 * dt);
  const QuadDeriv k3 = eval(s0.add_scaled(k2, 0.5 * dt), t + 0.5 * dt);
  const QuadDeriv k4 = eval(s0.add_scaled(k3, dt), t + dt);

  detail::StateVec out = s0;
  const double h6 = dt / 6.0;
  out.p += h6 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
  out.q += h6 * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq);
  out.v += h6 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
  out.w += h6 * (k1.dw + 2.0 * k2.dw + 2.0 * k3.dw + k4.dw);

  QuadState next = out.to();
  next.q.normalize();
  if (!all_finite(next.p) || !all_finite(next.v) || !all_finite(next.w) ||
      !std::isfinite(next.q.w()) || !std::isfinite(next.q.x()) ||
      !std::isfinite(next.q.y()) || !std::isfinite(next.q.z())) {
    throw NonFiniteError("step_rk4: state diverged to NaN/Inf at t=" + std::to_string(t));
  }
  return next;
}

struct PassEvent {
  double deviation = 0.0;  // in-plane distance from crossing point to center
  double time = 0.0;
  Vec3 point = Vec3::Zero();
  bool within_radius = false;
};

// Detects a forward crossing of the gate plane by the motion segment
// p_prev -> p_now. The plane normal is the exit direction; deviation is
// measured in the plane at the interpolated crossing point.
inline std::optional<PassEvent> detect_gate_pass(const Vec3& p_prev, const Vec3& p_now,
                                                 const Gate& gate_now, double t_prev,
                                                 double dt) {
  const Vec3 n = gate_now.exit_dir.normalized();
  const double s_prev = (p_prev - gate_now.center).dot(n);
  const double s_now = (p_now - gate_now.center).dot(n);
  if (!(s_prev < 0.0 && s_now >= 0.0)) return std::nullopt;
  const double denom = s_now - s_prev;
  if (denom <= 0.0) return std::nullopt;
  const double lambda = -s_prev / denom;
  PassEvent event;
  event.point = p_prev + lambda * (p_now - p_prev);
  const Vec3 in_plane = (event.point - gate_now.center) -
                        (event.point - gate_now.center).dot(n) * n;
  event.deviation = in_plane.norm();
  event.time = t_prev + lambda * dt;
  event.within_radius = event.deviation <= gate_now.pass_radius;
  return event;
}

}  // namespace replan
