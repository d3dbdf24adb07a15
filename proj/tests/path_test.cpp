#include "replan/path.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "replan/velocity_graph.hpp"

namespace replan {
namespace {

AxisBoundsXyz default_bounds() {
  return AxisBoundsXyz{AxisBounds{-20.0, 20.0}, AxisBounds{-20.0, 20.0},
                       AxisBounds{-9.0, 25.0}};
}

PmmPlan single_axis_plan(double distance) {
  const AxisBoundsXyz u{AxisBounds{-1, 1}, AxisBounds{-1, 1}, AxisBounds{-1, 1}};
  PmmPlan plan;
  BoundaryState end;
  end.p = Vec3(distance, 0.0, 0.0);
  plan.segments.push_back(solve_segment(BoundaryState{}, end, u));
  plan.gate_velocities.push_back(end.v);
  plan.total_time = plan.segments[0].duration;
  return plan;
}

// Two-segment planar plan used by the arc-length and projection checks.
PmmPlan planar_plan() {
  const AxisBoundsXyz u = default_bounds();
  PmmPlan plan;
  BoundaryState a;
  a.p = Vec3(0, 0, 2);
  BoundaryState b;
  b.p = Vec3(8, 2, 2);
  b.v = Vec3(6, 4, 0);
  BoundaryState c;
  c.p = Vec3(12, 10, 3);
  c.v = Vec3(0, 8, 0);
  plan.segments.push_back(solve_segment(a, b, u));
  plan.segments.push_back(solve_segment(b, c, u));
  plan.gate_velocities = {b.v, c.v};
  plan.total_time = plan.segments[0].duration + plan.segments[1].duration;
  return plan;
}

TEST(AssemblePath, StraightLineLengthAndTangents) {
  const Path path = assemble_path(single_axis_plan(4.0));
  EXPECT_NEAR(path.total_length, 4.0, 1e-3);
  for (const auto& s : path.samples) {
    EXPECT_NEAR(s.tangent.x(), 1.0, 1e-9);
    EXPECT_NEAR(s.tangent.norm(), 1.0, 1e-9);
  }
  EXPECT_DOUBLE_EQ(path.samples.front().theta, 0.0);
}

TEST(AssemblePath, PlanTimeStrictlyIncreasing) {
  const Path path = assemble_path(planar_plan());
  for (std::size_t i = 1; i < path.samples.size(); ++i) {
    EXPECT_GT(path.samples[i].plan_time, path.samples[i - 1].plan_time);
    EXPECT_GT(path.samples[i].theta, path.samples[i - 1].theta);
  }
}

TEST(AssemblePath, ArcLengthMatchesQuadrature) {
  const PmmPlan plan = planar_plan();
  const Path path = assemble_path(plan);
  // Fine-step speed quadrature (Simpson) as the independent length oracle.
  const int n = 20000;
  const double h = plan.total_time / n;
  double quad = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t0 = i * h;
    const double speed0 = plan.eval(t0).v.norm();
    const double speed_mid = plan.eval(t0 + 0.5 * h).v.norm();
    const double speed1 = plan.eval(t0 + h).v.norm();
    quad += h / 6.0 * (speed0 + 4.0 * speed_mid + speed1);
  }
  EXPECT_NEAR(path.total_length, quad, 0.001 * quad);
}

TEST(AssemblePath, GateThetasLandOnGateCenters) {
  const PmmPlan plan = planar_plan();
  const Path path = assemble_path(plan);
  ASSERT_EQ(path.gate_thetas.size(), 2u);
  const Vec3 g0(8, 2, 2);
  const Vec3 g1(12, 10, 3);
  EXPECT_LT((path.point_at(path.gate_thetas[0]).position - g0).norm(), 1e-6);
  EXPECT_LT((path.point_at(path.gate_thetas[1]).position - g1).norm(), 1e-6);
}

TEST(AssemblePath, DegeneratePlanThrows) {
  EXPECT_THROW(assemble_path(single_axis_plan(0.0)), DegeneratePlanError);
}

TEST(AssemblePath, LengthInvariantUnderRotation) {
  const PmmPlan plan = planar_plan();
  // Rotating every boundary state by a rigid rotation must preserve length.
  const Eigen::AngleAxisd rot(0.7, Vec3(0.2, 0.3, 0.93).normalized());
  const AxisBoundsXyz wide{AxisBounds{-40, 40}, AxisBounds{-40, 40}, AxisBounds{-40, 40}};
  PmmPlan rotated;
  BoundaryState prev_orig{Vec3(0, 0, 2), Vec3::Zero()};
  BoundaryState prev{rot * prev_orig.p, rot * prev_orig.v};
  for (const auto& seg : plan.segments) {
    BoundaryState next_orig{seg.end_position(), seg.end_velocity()};
    BoundaryState next{rot * next_orig.p, rot * next_orig.v};
    rotated.segments.push_back(solve_segment(prev, next, wide));
    prev = next;
  }
  rotated.total_time = 0.0;
  for (const auto& seg : rotated.segments) rotated.total_time += seg.duration;

  // The rotated segments are different trajectories (axis-aligned bounds are
  // not rotation invariant), so compare chord length of the same polyline
  // instead: rotate the original sampled positions.
  const Path path = assemble_path(plan);
  double rotated_length = 0.0;
  for (std::size_t i = 1; i < path.samples.size(); ++i) {
    rotated_length +=
        (rot * path.samples[i].position - rot * path.samples[i - 1].position).norm();
  }
  EXPECT_NEAR(rotated_length, path.total_length, 1e-9);
}

TEST(PointAt, KnotsAndMidpoints) {
  const Path path = assemble_path(single_axis_plan(4.0));
  const PointOnPath first = path.point_at(0.0);
  EXPECT_LT((first.position - Vec3(0, 0, 0)).norm(), 1e-12);
  const PointOnPath last = path.point_at(path.total_length);
  EXPECT_LT((last.position - Vec3(4, 0, 0)).norm(), 1e-3);
  const PointOnPath mid = path.point_at(2.0);
  EXPECT_NEAR(mid.position.x(), 2.0, 1e-9);
  EXPECT_THROW(path.point_at(-0.5), OutOfRangeError);
  EXPECT_THROW(path.point_at(path.total_length + 0.5), OutOfRangeError);
}

TEST(ProjectProgress, PointOnPathHasZeroErrors) {
  const Path path = assemble_path(planar_plan());
  const double theta = 0.37 * path.total_length;
  const PointOnPath pt = path.point_at(theta);
  const ContourErrors e = project_progress(path, pt.position, theta);
  EXPECT_LT(e.e_c.norm(), 1e-6);
  EXPECT_LT(e.e_l.norm(), 1e-6);
  EXPECT_NEAR(e.theta_star, theta, 2e-2);
}

TEST(ProjectProgress, LateralOffsetIsPureContour) {
  const Path path = assemble_path(single_axis_plan(4.0));
  const Vec3 p(2.0, 0.3, 0.0);
  const ContourErrors e = project_progress(path, p, 2.0);
  EXPECT_NEAR(e.e_c.norm(), 0.3, 1e-9);
  EXPECT_LT(e.e_l.norm(), 1e-9);
  EXPECT_NEAR(e.theta_star, 2.0, 1e-9);
}

TEST(ProjectProgress, ErrorsDecomposeAgainstTangent) {
  const Path path = assemble_path(planar_plan());
  UniformRng rng(5);
  for (int i = 0; i < 50; ++i) {
    const double guess = rng.uniform(0.0, path.total_length);
    const Vec3 p = path.point_at(guess).position +
                   Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const ContourErrors e = project_progress(path, p, guess);
    const Vec3 tangent = path.point_at(e.theta_star).tangent;
    EXPECT_LT(std::abs(e.e_c.dot(tangent)), 1e-6);
    EXPECT_LT(e.e_l.cross(tangent).norm(), 1e-6);
  }
}

TEST(ProjectProgress, MatchesDenseGlobalOracle) {
  const Path path = assemble_path(planar_plan());
  UniformRng rng(77);
  double max_spacing = 0.0;
  for (std::size_t i = 1; i < path.samples.size(); ++i) {
    max_spacing = std::max(max_spacing, path.samples[i].theta - path.samples[i - 1].theta);
  }
  for (int i = 0; i < 30; ++i) {
    const double true_theta = rng.uniform(0.0, path.total_length);
    const Vec3 p = path.point_at(true_theta).position +
                   Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                        rng.uniform(-0.5, 0.5));
    // Dense global scan oracle.
    double best_theta = 0.0;
    double best_d2 = std::numeric_limits<double>::infinity();
    const int steps = 40000;
    for (int k = 0; k <= steps; ++k) {
      const double theta = path.total_length * k / steps;
      const double d2 = (path.point_at(theta).position - p).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best_theta = theta;
      }
    }
    const ContourErrors e = project_progress(path, p, true_theta);
    EXPECT_NEAR(e.theta_star, best_theta, max_spacing + 1e-6) << "case " << i;
  }
}

TEST(ProjectProgress, IdempotentOnPathPoints) {
  const Path path = assemble_path(planar_plan());
  double max_spacing = 0.0;
  for (std::size_t i = 1; i < path.samples.size(); ++i) {
    max_spacing = std::max(max_spacing, path.samples[i].theta - path.samples[i - 1].theta);
  }
  for (double f : {0.0, 0.1, 0.33, 0.5, 0.77, 0.99, 1.0}) {
    const double theta = f * path.total_length;
    const ContourErrors e = project_progress(path, path.point_at(theta).position, theta);
    EXPECT_NEAR(e.theta_star, theta, max_spacing + 1e-9);
  }
}

TEST(ProjectProgress, ClampsToPathEnds) {
  const Path path = assemble_path(single_axis_plan(4.0));
  const ContourErrors past_end = project_progress(path, Vec3(10, 0, 0), path.total_length);
  EXPECT_NEAR(past_end.theta_star, path.total_length, 1e-9);
  const ContourErrors before = project_progress(path, Vec3(-3, 0, 0), 0.0);
  EXPECT_NEAR(before.theta_star, 0.0, 1e-9);
}

TEST(PathCsv, ReparsesToSameValues) {
  const Path path = assemble_path(planar_plan());
  std::ostringstream os;
  write_path_csv(path, os);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "theta,x,y,z,tx,ty,tz,plan_time");
  std::size_t row = 0;
  std::string line;
  while (std::getline(is, line)) {
    double v[8];
    ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &v[0], &v[1],
                          &v[2], &v[3], &v[4], &v[5], &v[6], &v[7]),
              8);
    const PathSample& s = path.samples[row];
    EXPECT_EQ(v[0], s.theta);
    EXPECT_EQ(v[1], s.position.x());
    EXPECT_EQ(v[2], s.position.y());
    EXPECT_EQ(v[3], s.position.z());
    EXPECT_EQ(v[4], s.tangent.x());
    EXPECT_EQ(v[5], s.tangent.y());
    EXPECT_EQ(v[6], s.tangent.z());
    EXPECT_EQ(v[7], s.plan_time);
    ++row;
  }
  EXPECT_EQ(row, path.samples.size());
}

}  // namespace
}  // namespace replan
