#pragma once

#include <array>
#include <cmath>

#include "replan/types.hpp"

namespace replan {

// Physical constants of the platform. Inertia and drag are diagonal.
struct QuadParams {
  double mass = 0.752;                   // kg
  Vec3 inertia{2.5e-3, 2.1e-3, 4.3e-3};  // kg m^2
  double arm_length = 0.15;              // m
  double torque_const = 0.022;           // m
  double thrust_min = 0.0;               // N per rotor
  double thrust_max = 8.5;               // N per rotor
  Vec3 drag{0.26, 0.28, 0.42};           // kg/s
  Vec3 gravity{0.0, 0.0, -9.81};         // m/s^2

  bool valid() const {
    return mass > 0.0 && inertia.minCoeff() > 0.0 && arm_length > 0.0 &&
           torque_const > 0.0 && thrust_min >= 0.0 && thrust_min < thrust_max &&
           drag.minCoeff() >= 0.0;
  }
};

// World-frame position/velocity, world-to-body unit quaternion, body rates.
struct QuadState {
  Vec3 p = Vec3::Zero();
  Quat q = Quat::Identity();
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();
};

struct RotorCommand {
  std::array<double, 4> f{0.0, 0.0, 0.0, 0.0};

  double collective() const { return f[0] + f[1] + f[2] + f[3]; }
};

// Collective thrust (body z) and body torques from the four rotor thrusts:
//   tau_x = l/sqrt(2) ( f1 + f2 - f3 - f4)
//   tau_y = l/sqrt(2) (-f1 + f2 + f3 - f4)
//   tau_z = c_tau     ( f1 - f2 + f3 - f4)
inline void rotor_mix(const RotorCommand& cmd, const QuadParams& params,
                      double& thrust, Vec3& torque) {
  const double ls = params.arm_length / std::sqrt(2.0);
  thrust = cmd.collective();
  torque.x() = ls * (cmd.f[0] + cmd.f[1] - cmd.f[2] - cmd.f[3]);
  torque.y() = ls * (-cmd.f[0] + cmd.f[1] + cmd.f[2] - cmd.f[3]);
  torque.z() = params.torque_const * (cmd.f[0] - cmd.f[1] + cmd.f[2] - cmd.f[3]);
}

// Exact inverse of rotor_mix followed by per-rotor clamping to the thrust
// limits. Returns true when any rotor saturated.
inline bool rotor_unmix(double thrust, const Vec3& torque, const QuadParams& params,
                        RotorCommand& cmd) {
  const double a = torque.x() * std::sqrt(2.0) / params.arm_length;
  const double b = torque.y() * std::sqrt(2.0) / params.arm_length;
  const double c = torque.z() / params.torque_const;
  std::array<double, 4> raw{0.25 * (thrust + a - b + c), 0.25 * (thrust + a + b - c),
                            0.25 * (thrust - a + b + c), 0.25 * (thrust - a - b - c)};
  bool saturated = false;
  for (int i = 0; i < 4; ++i) {
    const double clamped = std::clamp(raw[i], params.thrust_min, params.thrust_max);
    if (clamped != raw[i]) saturated = true;
    cmd.f[i] = clamped;
  }
  return saturated;
}

}  // namespace replan
