#pragma once

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>
#include <vector>

#include "replan/types.hpp"
#include "replan/velocity_graph.hpp"

namespace replan {

struct PathSample {
  double theta = 0.0;  // cumulative chordal arc length
  Vec3 position = Vec3::Zero();
  Vec3 tangent = Vec3::UnitX();
  Vec3 velocity = Vec3::Zero();  // plan velocity at this sample
  double plan_time = 0.0;
};

struct ContourErrors {
  Vec3 e_c = Vec3::Zero();  // normal to the path tangent
  Vec3 e_l = Vec3::Zero();  // along the path tangent
  double theta_star = 0.0;
};

struct PointOnPath {
  Vec3 position;
  Vec3 tangent;
  Vec3 velocity;
};

// Progress-parameterized polyline reference. Immutable after construction;
// the replanner publishes whole new snapshots instead of mutating.
struct Path {
  std::vector<PathSample> samples;
  double total_length = 0.0;
  std::vector<double> gate_thetas;

  PointOnPath point_at(double theta) const {
    if (theta < -kEvalTol || theta > total_length + kEvalTol) {
      throw OutOfRangeError("Path::point_at: theta outside [0, length]");
    }
    theta = std::clamp(theta, 0.0, total_length);
    const auto it = std::upper_bound(
        samples.begin(), samples.end(), theta,
        [](double value, const PathSample& s) { return value < s.theta; });
    if (it == samples.begin()) {
      return PointOnPath{samples.front().position, samples.front().tangent,
                         samples.front().velocity};
    }
    if (it == samples.end()) {
      return PointOnPath{samples.back().position, samples.back().tangent,
                         samples.back().velocity};
    }
    const PathSample& b = *it;
    const PathSample& a = *(it - 1);
    const double span = b.theta - a.theta;
    const double s = span > 0.0 ? (theta - a.theta) / span : 0.0;
    Vec3 tangent = (1.0 - s) * a.tangent + s * b.tangent;
    const double norm = tangent.norm();
    tangent = norm > 1e-12 ? Vec3(tangent / norm) : a.tangent;
    return PointOnPath{a.position + s * (b.position - a.position), tangent,
                       a.velocity + s * (b.velocity - a.velocity)};
  }
};

// Closest-point projection restricted to a progress window around the guess.
// The position error decomposes into a lag component along the tangent and a
// contour component normal to it.
inline ContourErrors project_progress(const Path& path, const Vec3& p,
                                      double theta_guess, double window = 2.0) {
  const double lo = std::clamp(theta_guess - window, 0.0, path.total_length);
  const double hi = std::clamp(theta_guess + window, 0.0, path.total_length);
  const auto& samples = path.samples;

  auto lower = std::lower_bound(
      samples.begin(), samples.end(), lo,
      [](const PathSample& s, double value) { return s.theta < value; });
  if (lower != samples.begin()) --lower;

  double best_d2 = std::numeric_limits<double>::infinity();
  double best_theta = lo;
  for (auto it = lower; it + 1 != samples.end() && it->theta <= hi; ++it) {
    const PathSample& a = *it;
    const PathSample& b = *(it + 1);
    const Vec3 seg = b.position - a.position;
    const double len2 = seg.squaredNorm();
    double s = len2 > 0.0 ? (p - a.position).dot(seg) / len2 : 0.0;
    s = std::clamp(s, 0.0, 1.0);
    double theta = a.theta + s * (b.theta - a.theta);
    theta = std::clamp(theta, lo, hi);
    const PointOnPath pt = path.point_at(theta);
    const double d2 = (p - pt.position).squaredNorm();
    if (d2 < best_d2 - 1e-15) {
      best_d2 = d2;
      best_theta = theta;
    }
  }

  const PointOnPath pt = path.point_at(best_theta);
  const Vec3 err = p - pt.position;
  ContourErrors out;
  out.theta_star = best_theta;
  out.e_l = err.dot(pt.tangent) * pt.tangent;
  out.e_c = err - out.e_l;
  return out;
}

// Samples the plan kinematics on a uniform time grid plus the exact segment
// end times, so every gate crossing lands on a sample. Tangents come from the
// plan velocity, with a forward-difference fallback below 0.01 m/s.
inline Path assemble_path(const PmmPlan& plan, double sample_dt = 0.01) {
  if (plan.segments.empty() || sample_dt <= 0.0) {
    throw DegeneratePlanError("assemble_path: empty plan or nonpositive sample_dt");
  }
  const std::vector<double> gate_times = plan.gate_times();
  const double total_time = plan.total_time;

  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(total_time / sample_dt) + gate_times.size() + 2);
  for (double t = 0.0; t < total_time; t += sample_dt) times.push_back(t);
  times.insert(times.end(), gate_times.begin(), gate_times.end());
  times.push_back(total_time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-12; }),
              times.end());

  struct Raw {
    double t;
    Vec3 p;
    Vec3 v;
    double theta;
  };
  std::vector<Raw> raw;
  raw.reserve(times.size());
  double theta = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const PmmSegment::State s = plan.eval(times[i]);
    if (i > 0) theta += (s.p - raw.back().p).norm();
    raw.push_back(Raw{times[i], s.p, s.v, theta});
  }
  if (theta < 1e-6) {
    throw DegeneratePlanError("assemble_path: total length below 1e-6 m");
  }

  Path path;
  path.samples.reserve(raw.size());
  constexpr double kMinChord = 1e-9;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!path.samples.empty() && raw[i].theta - path.samples.back().theta < kMinChord) {
      continue;
    }
    PathSample s;
    s.theta = raw[i].theta;
    s.position = raw[i].p;
    s.velocity = raw[i].v;
    s.plan_time = raw[i].t;
    path.samples.push_back(s);
  }
  path.total_length = path.samples.back().theta;

  for (std::size_t i = 0; i < path.samples.size(); ++i) {
    PathSample& s = path.samples[i];
    const Vec3 chord = i + 1 < path.samples.size()
                           ? Vec3(path.samples[i + 1].position - s.position)
                           : Vec3(s.position - path.samples[i - 1].position);
    // Velocity gives the tangent unless it is slow or points against the
    // local chord (a residual hover drift opposing the path direction).
    if (s.velocity.norm() >= 0.01 && s.velocity.dot(chord) > 0.0) {
      s.tangent = s.velocity.normalized();
    } else if (chord.norm() > 1e-12) {
      s.tangent = chord.normalized();
    } else if (i > 0) {
      s.tangent = path.samples[i - 1].tangent;
    }
  }

  path.gate_thetas.reserve(gate_times.size());
  for (double gt : gate_times) {
    const auto it = std::lower_bound(raw.begin(), raw.end(), gt - 1e-12,
                                     [](const Raw& r, double value) { return r.t < value; });
    path.gate_thetas.push_back(it != raw.end() ? it->theta : path.total_length);
  }
  return path;
}

inline void write_path_csv(const Path& path, std::ostream& os) {
  os << "theta,x,y,z,tx,ty,tz,plan_time\n";
  char line[256];
  for (const auto& s : path.samples) {
    std::snprintf(line, sizeof(line),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.theta,
                  s.position.x(), s.position.y(), s.position.z(), s.tangent.x(),
                  s.tangent.y(), s.tangent.z(), s.plan_time);
    os << line;
  }
}

}  // namespace replan
