// Plans through three gates with both sampling strategies and prints the
// resulting minimum times.

#include <cstdio>

#include "replan/velocity_graph.hpp"

int main() {
  using namespace replan;

  std::vector<Gate> gates(3);
  gates[0].id = 0;
  gates[0].center = Vec3(8.0, 0.0, 2.0);
  gates[0].exit_dir = Vec3(1.0, 0.0, 0.0);
  gates[1].id = 1;
  gates[1].center = Vec3(16.0, 5.0, 3.0);
  gates[1].exit_dir = Vec3(0.6, 0.8, 0.0);
  gates[2].id = 2;
  gates[2].center = Vec3(20.0, 14.0, 2.0);
  gates[2].exit_dir = Vec3(0.0, 1.0, 0.0);

  BoundaryState start;
  start.p = Vec3(0.0, 0.0, 1.0);

  const AxisBoundsXyz bounds{AxisBounds{-20.0, 20.0}, AxisBounds{-20.0, 20.0},
                             AxisBounds{-9.0, 25.0}};
  const ConeGrid cone;

  const RefocusResult refocus = plan_refocusing(start, gates, cone, bounds);
  std::printf("refocus:  T* = %.4f s after %d iterations (%llu segment solves)\n",
              refocus.plan.total_time, refocus.iterations,
              static_cast<unsigned long long>(refocus.edges_evaluated));

  const VelocitySearchResult random =
      plan_random(start, gates, cone, bounds, 150, /*rng_seed=*/7);
  std::printf("random:   T* = %.4f s (%llu segment solves)\n", random.plan.total_time,
              static_cast<unsigned long long>(random.edges_evaluated));
  return 0;
}
