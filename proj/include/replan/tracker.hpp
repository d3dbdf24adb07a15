#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "replan/path.hpp"
#include "replan/quad.hpp"
#include "replan/types.hpp"

namespace replan {

struct ContouringConfig {
  double q_l = 100.0;       // lag error weight
  double q_c = 200.0;       // contour error weight
  double mu = 1.0;          // progress reward
  double r_dv = 0.1;        // progress-rate-change weight
  double v_theta_max = 25.0;
  double dv_theta_min = -2.0;
  double dv_theta_max = 2.0;
  int n_steps = 20;
  double dt = 0.06;
  Vec3 a_lo{-20.0, -20.0, -9.0};
  Vec3 a_hi{20.0, 20.0, 25.0};
  int max_iterations = 60;
  double projection_window = 2.0;

  bool valid() const {
    return q_l >= 0.0 && q_c >= 0.0 && mu >= 0.0 && r_dv >= 0.0 &&
           v_theta_max > 0.0 && dv_theta_min <= 0.0 && dv_theta_max >= 0.0 &&
           n_steps >= 1 && dt > 0.0 && (a_hi - a_lo).minCoeff() > 0.0 &&
           a_lo.maxCoeff() < 0.0 && a_hi.minCoeff() > 0.0;
  }
};

// Progress state carried across control ticks. The warm-start vectors hold
// the previous solution so each solve can start from its one-step shift.
struct TrackerState {
  double theta = 0.0;
  double v_theta = 0.0;
  Vec3 last_accel = Vec3::Zero();
  std::vector<Vec3> warm_accels;
  std::vector<double> warm_dvs;
};

struct HorizonPoint {
  Vec3 position = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
  double v_theta = 0.0;
};

// Contouring cost over a predicted horizon. Progress integrates forward from
// theta0 (theta_{k+1} = theta_k + v_theta_k dt) and entry k's position is
// compared against the path at the integrated progress. The rate-change
// penalty covers consecutive horizon entries.
inline double contouring_cost(const std::vector<HorizonPoint>& horizon, const Path& path,
                              const ContouringConfig& cfg, double theta0) {
  double cost = 0.0;
  double theta = theta0;
  for (std::size_t k = 0; k < horizon.size(); ++k) {
    theta += horizon[k].v_theta * cfg.dt;
    const double theta_eval = std::clamp(theta, 0.0, path.total_length);
    const PointOnPath pt = path.point_at(theta_eval);
    const Vec3 err = horizon[k].position - pt.position;
    const double lag = err.dot(pt.tangent);
    const double lag2 = lag * lag;
    const double contour2 = err.squaredNorm() - lag2;
    cost += cfg.q_l * lag2 + cfg.q_c * contour2 - cfg.mu * horizon[k].v_theta;
    if (k > 0) {
      const double dv = horizon[k].v_theta - horizon[k - 1].v_theta;
      cost += cfg.r_dv * dv * dv;
    }
  }
  return cost;
}

struct ContouringSolution {
  Vec3 accel = Vec3::Zero();
  TrackerState next_state;
  std::vector<HorizonPoint> horizon;
  double cost = 0.0;
  int iterations = 0;
  std::vector<double> iterate_costs;  // accepted cost after each iteration
};

namespace detail {

struct ContouringProblem {
  Vec3 p0;
  Vec3 v0;
  double theta0;
  double v_theta0;
  const Path* path;
  const ContouringConfig* cfg;
  Vec3 drag_over_m;

  // Decision vector: per-step acceleration and progress-rate change.
  struct Decision {
    std::vector<Vec3> a;
    std::vector<double> dv;
  };

  // Feasibility map: accelerations clamp to the box, rate changes clamp to
  // their bounds, and the accumulated progress rate clamps to [0, v_max]
  // with the realized change written back. All bounds hold exactly after
  // this pass.
  void project(Decision& z) const {
    double v = v_theta0;
    for (int k = 0; k < cfg->n_steps; ++k) {
      for (int i = 0; i < 3; ++i) {
        z.a[k][i] = std::clamp(z.a[k][i], cfg->a_lo[i], cfg->a_hi[i]);
      }
      double dv = std::clamp(z.dv[k], cfg->dv_theta_min, cfg->dv_theta_max);
      double v_next = std::clamp(v + dv, 0.0, cfg->v_theta_max);
      z.dv[k] = v_next - v;
      v = v_next;
    }
  }

  std::vector<HorizonPoint> rollout(const Decision& z) const {
    std::vector<HorizonPoint> horizon(cfg->n_steps);
    Vec3 p = p0;
    Vec3 v = v0;
    double v_theta = v_theta0;
    const double dt = cfg->dt;
    for (int k = 0; k < cfg->n_steps; ++k) {
      const Vec3 net = z.a[k] - drag_over_m.cwiseProduct(v);
      p += dt * v + 0.5 * dt * dt * net;
      v += dt * net;
      v_theta += z.dv[k];
      horizon[k].position = p;
      horizon[k].accel = z.a[k];
      horizon[k].v_theta = v_theta;
    }
    return horizon;
  }

  double cost(const std::vector<HorizonPoint>& horizon) const {
    return contouring_cost(horizon, *path, *cfg, theta0);
  }

  // Analytic gradient with the path tangent frozen at the current progress
  // estimates (the usual contouring linearization).
  void gradient(const Decision& z, const std::vector<HorizonPoint>& horizon,
                Decision& grad) const {
    const int n = cfg->n_steps;
    const double dt = cfg->dt;
    std::vector<Vec3> g_pos(n);
    std::vector<double> g_theta(n);
    double theta = theta0;
    for (int k = 0; k < n; ++k) {
      theta += horizon[k].v_theta * dt;
      const double theta_eval = std::clamp(theta, 0.0, path->total_length);
      const PointOnPath pt = path->point_at(theta_eval);
      const Vec3 err = horizon[k].position - pt.position;
      const double lag = err.dot(pt.tangent);
      g_pos[k] = 2.0 * cfg->q_l * lag * pt.tangent +
                 2.0 * cfg->q_c * (err - lag * pt.tangent);
      // The contour term is tangent-orthogonal, so only the lag term sees
      // a progress derivative under the frozen-tangent linearization.
      g_theta[k] = -2.0 * cfg->q_l * lag;
    }

    // Backward pass over the point-mass dynamics.
    Vec3 acc_p = Vec3::Zero();
    Vec3 acc_v = Vec3::Zero();
    const Vec3 dp_dv = Vec3::Constant(dt) - 0.5 * dt * dt * drag_over_m;
    const Vec3 dv_dv = Vec3::Ones() - dt * drag_over_m;
    for (int k = n - 1; k >= 0; --k) {
      const Vec3 lam_p = g_pos[k] + acc_p;
      const Vec3 lam_v = dp_dv.cwiseProduct(acc_p) + dv_dv.cwiseProduct(acc_v);
      grad.a[k] = 0.5 * dt * dt * lam_p + dt * lam_v;
      acc_p = lam_p;
      acc_v = lam_v;
    }

    // Progress chain: v_theta_j influences every theta_{k >= j}; dv_m
    // influences every v_theta_{j >= m}.
    std::vector<double> g_v(n, 0.0);
    double theta_suffix = 0.0;
    for (int j = n - 1; j >= 0; --j) {
      theta_suffix += g_theta[j];
      g_v[j] = dt * theta_suffix - cfg->mu;
    }
    for (int j = 0; j < n; ++j) {
      const double dv_prev = j > 0 ? horizon[j].v_theta - horizon[j - 1].v_theta : 0.0;
      const double dv_next =
          j + 1 < n ? horizon[j + 1].v_theta - horizon[j].v_theta : 0.0;
      if (j > 0) g_v[j] += 2.0 * cfg->r_dv * dv_prev;
      if (j + 1 < n) g_v[j] -= 2.0 * cfg->r_dv * dv_next;
    }
    double v_suffix = 0.0;
    for (int m = n - 1; m >= 0; --m) {
      v_suffix += g_v[m];
      grad.dv[m] = v_suffix;
    }
  }
};

}  // namespace detail

// Receding-horizon contouring solve: projected-gradient descent with a
// backtracking line search, warm-started from the previous solution. Only
// improving steps are accepted, so the iterate cost never increases and the
// returned horizon is feasible by construction.
inline ContouringSolution solve_contouring(const Vec3& position, const Vec3& velocity,
                                           const TrackerState& state, const Path& path,
                                           const ContouringConfig& cfg,
                                           const QuadParams& quad = QuadParams{}) {
  const int n = cfg.n_steps;
  detail::ContouringProblem prob;
  prob.p0 = position;
  prob.v0 = velocity;
  prob.theta0 = std::clamp(state.theta, 0.0, path.total_length);
  prob.v_theta0 = std::clamp(state.v_theta, 0.0, cfg.v_theta_max);
  prob.path = &path;
  prob.cfg = &cfg;
  prob.drag_over_m = quad.drag / quad.mass;

  using Decision = detail::ContouringProblem::Decision;
  const auto make_decision = [&](bool shifted) {
    Decision z;
    z.a.assign(n, Vec3::Zero());
    z.dv.assign(n, 0.0);
    const std::size_t m = state.warm_accels.size();
    if (m == static_cast<std::size_t>(n)) {
      for (int k = 0; k < n; ++k) {
        const int src = shifted ? std::min(k + 1, n - 1) : k;
        z.a[k] = state.warm_accels[src];
        z.dv[k] = state.warm_dvs[src];
      }
    }
    prob.project(z);
    return z;
  };

  // Reference-following candidate: steer the predicted velocity toward the
  // path's own plan velocity at the advancing progress estimate. Gives the
  // descent a feed-forward start instead of a standstill.
  const auto make_reference_decision = [&]() {
    Decision z;
    z.a.assign(n, Vec3::Zero());
    z.dv.assign(n, 0.0);
    Vec3 v_sim = velocity;
    double theta = prob.theta0;
    double v_theta = prob.v_theta0;
    // Velocity-matching rate for the candidate; 1/dt would be deadbeat and
    // overshoots badly through the cascade, a ~0.3 s closing time does not.
    constexpr double kMatchGain = 3.0;
    for (int k = 0; k < n; ++k) {
      const double theta_ahead =
          std::clamp(theta + std::max(v_theta, 3.0) * cfg.dt, 0.0, path.total_length);
      const PointOnPath ref = path.point_at(theta_ahead);
      Vec3 a = kMatchGain * (ref.velocity - v_sim) + prob.drag_over_m.cwiseProduct(v_sim);
      for (int i = 0; i < 3; ++i) a[i] = std::clamp(a[i], cfg.a_lo[i], cfg.a_hi[i]);
      z.a[k] = a;
      const Vec3 net = a - prob.drag_over_m.cwiseProduct(v_sim);
      // Progress tracks the mid-step speed: the position gains the step
      // average while theta gains a full step of v_theta.
      const double target_rate = std::clamp(
          (v_sim + 0.5 * cfg.dt * net).dot(ref.tangent), 0.0, cfg.v_theta_max);
      v_sim += cfg.dt * net;
      z.dv[k] = target_rate - v_theta;
      const double dv = std::clamp(z.dv[k], cfg.dv_theta_min, cfg.dv_theta_max);
      v_theta = std::clamp(v_theta + dv, 0.0, cfg.v_theta_max);
      theta = std::clamp(theta + v_theta * cfg.dt, 0.0, path.total_length);
    }
    prob.project(z);
    return z;
  };

  // Critically damped tracking candidate: PD on the reference position and
  // velocity at the advancing progress estimate. Near-optimal for closing a
  // displacement without overshoot.
  const auto make_pd_decision = [&]() {
    Decision z;
    z.a.assign(n, Vec3::Zero());
    z.dv.assign(n, 0.0);
    constexpr double kp = 16.0;
    constexpr double kd = 8.0;
    Vec3 p_sim = position;
    Vec3 v_sim = velocity;
    double theta = prob.theta0;
    double v_theta = prob.v_theta0;
    for (int k = 0; k < n; ++k) {
      const double theta_ahead =
          std::clamp(theta + std::max(v_theta, 3.0) * cfg.dt, 0.0, path.total_length);
      const PointOnPath ref = path.point_at(theta_ahead);
      Vec3 a = kp * (ref.position - p_sim) + kd * (ref.velocity - v_sim) +
               prob.drag_over_m.cwiseProduct(v_sim);
      for (int i = 0; i < 3; ++i) a[i] = std::clamp(a[i], cfg.a_lo[i], cfg.a_hi[i]);
      z.a[k] = a;
      const Vec3 net = a - prob.drag_over_m.cwiseProduct(v_sim);
      const double target_rate = std::clamp(
          (v_sim + 0.5 * cfg.dt * net).dot(ref.tangent), 0.0, cfg.v_theta_max);
      p_sim += cfg.dt * v_sim + 0.5 * cfg.dt * cfg.dt * net;
      v_sim += cfg.dt * net;
      z.dv[k] = target_rate - v_theta;
      const double dv = std::clamp(z.dv[k], cfg.dv_theta_min, cfg.dv_theta_max);
      v_theta = std::clamp(v_theta + dv, 0.0, cfg.v_theta_max);
      theta = std::clamp(theta + v_theta * cfg.dt, 0.0, path.total_length);
    }
    prob.project(z);
    return z;
  };

  struct Iterate {
    Decision z;
    std::vector<HorizonPoint> horizon;
    double cost = std::numeric_limits<double>::infinity();
    double step = 1.0;
  };

  Decision grad;
  grad.a.assign(n, Vec3::Zero());
  grad.dv.assign(n, 0.0);

  // Projected-gradient descent with backtracking. The acceleration and
  // progress blocks have very different scales; each is normalized so one
  // step size serves both. Only improving steps are accepted.
  int iterations = 0;
  const auto descend = [&](Iterate& it, int budget, std::vector<double>* log) {
    for (int iter = 0; iter < budget; ++iter) {
      prob.gradient(it.z, it.horizon, grad);
      double g_a = 0.0;
      double g_dv = 0.0;
      for (int k = 0; k < n; ++k) {
        g_a = std::max(g_a, grad.a[k].cwiseAbs().maxCoeff());
        g_dv = std::max(g_dv, std::abs(grad.dv[k]));
      }
      if (g_a < 1e-12 && g_dv < 1e-12) break;
      const double inv_a = g_a > 1e-12 ? 1.0 / g_a : 0.0;
      const double inv_dv = g_dv > 1e-12 ? 1.0 / g_dv : 0.0;

      bool accepted = false;
      for (int bt = 0; bt < 16; ++bt) {
        Decision trial = it.z;
        for (int k = 0; k < n; ++k) {
          trial.a[k] -= it.step * inv_a * grad.a[k];
          trial.dv[k] -= it.step * inv_dv * grad.dv[k];
        }
        prob.project(trial);
        std::vector<HorizonPoint> trial_h = prob.rollout(trial);
        const double trial_cost = prob.cost(trial_h);
        if (trial_cost < it.cost - 1e-12) {
          it.z = std::move(trial);
          it.horizon = std::move(trial_h);
          it.cost = trial_cost;
          accepted = true;
          it.step *= 1.5;
          break;
        }
        it.step *= 0.5;
      }
      ++iterations;
      if (log) log->push_back(it.cost);
      if (!accepted) break;
    }
  };

  // Each candidate gets a short polish before the winner is picked: raw
  // candidate costs are misleading when a moving start must pay transient
  // error before its progress reward shows.
  const auto make_iterate = [&](Decision&& cand) {
    Iterate it;
    it.z = std::move(cand);
    it.horizon = prob.rollout(it.z);
    it.cost = prob.cost(it.horizon);
    return it;
  };
  Iterate best = make_iterate(make_decision(true));
  const double shifted_warm_cost = best.cost;
  const int polish = std::min(12, cfg.max_iterations);
  descend(best, polish, nullptr);
  {
    Iterate cand = make_iterate(make_decision(false));
    descend(cand, polish, nullptr);
    if (cand.cost < best.cost) best = std::move(cand);
  }
  {
    Iterate cand = make_iterate(make_reference_decision());
    descend(cand, polish, nullptr);
    if (cand.cost < best.cost) best = std::move(cand);
  }
  {
    Iterate cand = make_iterate(make_pd_decision());
    descend(cand, polish, nullptr);
    if (cand.cost < best.cost) best = std::move(cand);
  }
  if (!std::isfinite(best.cost)) {
    throw SolverDivergedError("solve_contouring: non-finite warm-start cost");
  }

  std::vector<double> iterate_costs{best.cost};
  descend(best, cfg.max_iterations, &iterate_costs);
  Decision z = std::move(best.z);
  std::vector<HorizonPoint> horizon = std::move(best.horizon);
  const double cost = best.cost;

  if (!std::isfinite(cost) || cost > shifted_warm_cost + 1e-9) {
    throw SolverDivergedError("solve_contouring: descent failed to hold the warm start");
  }

  ContouringSolution sol;
  sol.accel = z.a[0];
  sol.horizon = horizon;
  sol.cost = cost;
  sol.iterations = iterations;
  sol.iterate_costs = std::move(iterate_costs);
  sol.next_state.theta = prob.theta0;
  sol.next_state.v_theta = horizon[0].v_theta;
  sol.next_state.last_accel = z.a[0];
  sol.next_state.warm_accels = z.a;
  sol.next_state.warm_dvs = z.dv;
  return sol;
}

struct CascadeGains {
  double attitude_p = 20.0;  // 1/s, tilt error to bodyrate
  double rate_p = 100.0;     // 1/s, bodyrate error to angular accel
};

struct CascadeResult {
  RotorCommand cmd;
  bool saturated = false;
};

// Acceleration command to single-rotor thrusts: desired force (gravity and
// drag compensated) sets the thrust axis, tilt error maps to a bodyrate
// command, rate error maps to torque through the inertia, and the mixer
// inverse clamps per-rotor thrusts.
inline CascadeResult cascade(const Vec3& accel_cmd, const QuadState& state,
                             const QuadParams& params, const CascadeGains& gains = {}) {
  const Eigen::Matrix3d rot = state.q.toRotationMatrix();
  const Vec3 drag_world =
      rot * params.drag.cwiseProduct(rot.transpose() * state.v);
  Vec3 f_des = params.mass * (accel_cmd - params.gravity) + drag_world;

  const Vec3 z_body = rot.col(2);
  double thrust = f_des.dot(z_body);
  thrust = std::max(thrust, 0.0);

  Vec3 w_cmd = Vec3::Zero();
  const double f_norm = f_des.norm();
  if (f_norm > 1e-9) {
    const Vec3 z_des_body = rot.transpose() * (f_des / f_norm);
    const Vec3 axis = Vec3::UnitZ().cross(z_des_body);
    const double sin_angle = axis.norm();
    const double cos_angle = std::clamp(z_des_body.z(), -1.0, 1.0);
    if (sin_angle > 1e-9) {
      const double angle = std::atan2(sin_angle, cos_angle);
      w_cmd = gains.attitude_p * angle * (axis / sin_angle);
    } else if (cos_angle < 0.0) {
      // Desired thrust points opposite body z; rotate about x.
      w_cmd = gains.attitude_p * M_PI * Vec3::UnitX();
    }
  }

  const Vec3 w_err = w_cmd - state.w;
  const Vec3 torque =
      params.inertia.cwiseProduct(gains.rate_p * w_err) +
      state.w.cross(params.inertia.cwiseProduct(state.w));

  CascadeResult out;
  out.saturated = rotor_unmix(thrust, torque, params, out.cmd);
  return out;
}

}  // namespace replan
