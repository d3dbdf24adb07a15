#pragma once

#include <vector>

#include "replan/types.hpp"

namespace replan {

// Piecewise-linear center displacement over time. Empty schedule means the
// gate is static. Offsets hold their last value past the final knot.
struct GateMotionKnot {
  double t = 0.0;
  Vec3 offset = Vec3::Zero();
};

struct GateMotion {
  std::vector<GateMotionKnot> knots;

  bool empty() const { return knots.empty(); }

  Vec3 offset_at(double t) const {
    if (knots.empty()) return Vec3::Zero();
    if (t <= knots.front().t) return knots.front().offset;
    if (t >= knots.back().t) return knots.back().offset;
    for (std::size_t i = 1; i < knots.size(); ++i) {
      if (t <= knots[i].t) {
        const auto& a = knots[i - 1];
        const auto& b = knots[i];
        const double s = (t - a.t) / (b.t - a.t);
        return a.offset + s * (b.offset - a.offset);
      }
    }
    return knots.back().offset;
  }
};

struct Gate {
  int id = 0;
  Vec3 center = Vec3::Zero();
  Vec3 exit_dir = Vec3::UnitX();
  double pass_radius = 1.0;
  GateMotion motion;
};

inline Gate gate_at(const Gate& gate, double t) {
  Gate g = gate;
  g.center += gate.motion.offset_at(t);
  return g;
}

// Orthonormal frame anchored at the gate's exit direction: t along exit,
// n horizontal-ish side axis, b completing the right-handed triple.
struct GateFrame {
  Vec3 t;
  Vec3 n;
  Vec3 b;
};

inline GateFrame gate_frame(const Vec3& exit_dir) {
  GateFrame f;
  f.t = exit_dir.normalized();
  Vec3 up = Vec3::UnitZ();
  if (std::abs(f.t.dot(up)) > 0.999) up = Vec3::UnitX();
  f.n = up.cross(f.t).normalized();
  f.b = f.t.cross(f.n);
  return f;
}

// (speed, yaw, pitch) in the gate frame -> world velocity. Yaw rotates in the
// t-n plane, pitch tilts toward b; both zero recover speed * exit_dir.
inline Vec3 velocity_from_cone(const Gate& gate, double speed, double yaw, double pitch) {
  const GateFrame f = gate_frame(gate.exit_dir);
  const Vec3 dir = std::cos(pitch) * (std::cos(yaw) * f.t + std::sin(yaw) * f.n) +
                   std::sin(pitch) * f.b;
  return speed * dir;
}

struct ConeCoords {
  double speed = 0.0;
  double yaw = 0.0;
  double pitch = 0.0;
};

inline ConeCoords cone_coords_of(const Gate& gate, const Vec3& velocity) {
  ConeCoords c;
  c.speed = velocity.norm();
  if (c.speed < 1e-12) return c;
  const GateFrame f = gate_frame(gate.exit_dir);
  const Vec3 d = velocity / c.speed;
  c.pitch = std::asin(std::clamp(d.dot(f.b), -1.0, 1.0));
  c.yaw = std::atan2(d.dot(f.n), d.dot(f.t));
  return c;
}

}  // namespace replan
