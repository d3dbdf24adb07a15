#pragma once

#include <cstdint>
#include <vector>

#include "replan/gate.hpp"
#include "replan/pmm_axis.hpp"
#include "replan/quad.hpp"
#include "replan/sim.hpp"
#include "replan/tracker.hpp"
#include "replan/types.hpp"
#include "replan/velocity_graph.hpp"

namespace replan {

// Complete description of one run: track, platform, planner and tracker
// settings. Parsed from the JSON scenario format (see io.hpp); every field
// has a default except the track itself.
struct Scenario {
  std::vector<Gate> track;
  BoundaryState start;
  AxisBoundsXyz pmm_bounds{AxisBounds{-20.0, 20.0}, AxisBounds{-20.0, 20.0},
                           AxisBounds{-9.0, 25.0}};
  ConeGrid cone;
  int h_random = 150;
  std::vector<WindRegion> wind;
  double sim_dt = 0.001;
  int control_hz = 100;
  ContouringConfig tracker;
  CascadeGains gains;
  QuadParams quad;
  int laps = 1;
  double timeout = 30.0;
  int replan_every = 1;
  int gate_horizon = 3;
  bool deterministic = true;
  std::uint64_t seed = 1;

  bool valid() const {
    return !track.empty() && laps >= 1 && timeout > 0.0 && replan_every >= 1 &&
           gate_horizon >= 1 && sim_dt > 0.0 && control_hz >= 1 && cone.valid() &&
           h_random >= 1 && tracker.valid() && quad.valid() &&
           pmm_bounds[0].valid() && pmm_bounds[1].valid() && pmm_bounds[2].valid();
  }

  // Gate sequence over all laps; index i is the i-th gate to pass.
  std::size_t total_targets() const { return track.size() * static_cast<std::size_t>(laps); }

  const Gate& target_gate(std::size_t target_index) const {
    return track[target_index % track.size()];
  }

  // Up to gate_horizon upcoming gates starting at target_index, truncated at
  // the end of the final lap. Centers are displaced per their motion at time t.
  std::vector<Gate> horizon_gates(std::size_t target_index, double t) const {
    std::vector<Gate> gates;
    const std::size_t total = total_targets();
    for (std::size_t k = target_index;
         k < total && gates.size() < static_cast<std::size_t>(gate_horizon); ++k) {
      gates.push_back(gate_at(target_gate(k), t));
    }
    return gates;
  }

  // Every gate of the run in passing order, displaced per motion at time t.
  std::vector<Gate> all_target_gates(double t) const {
    std::vector<Gate> gates;
    gates.reserve(total_targets());
    for (std::size_t k = 0; k < total_targets(); ++k) {
      gates.push_back(gate_at(target_gate(k), t));
    }
    return gates;
  }
};

}  // namespace replan
