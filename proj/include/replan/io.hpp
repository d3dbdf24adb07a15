#pragma once

#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "json.hpp"

#include "replan/bench.hpp"
#include "replan/episode.hpp"
#include "replan/scenario.hpp"

namespace replan {

using Json = nlohmann::json;

namespace detail {

inline void check_keys(const Json& j, const std::string& context,
                       std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ParseError("unknown key '" + item.key() + "' in " + context);
    }
  }
}

inline const Json& require(const Json& j, const std::string& context, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw ParseError("missing required key '" + std::string(key) + "' in " + context);
  }
  return *it;
}

inline Vec3 parse_vec3(const Json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() ||
      !j[2].is_number()) {
    throw ParseError(context + " must be an array of 3 numbers");
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline Json vec3_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    throw ParseError(std::string("key '") + key + "' has the wrong type");
  }
}

constexpr double kDegToRad = 0.017453292519943295;

}  // namespace detail

// Yaw/pitch spans are kept in degrees as written so a serialize/parse round
// trip reproduces the scenario bit for bit.
struct ScenarioSpans {
  double yaw_span_deg = 120.0;
  double pitch_span_deg = 90.0;
};

struct ScenarioFile {
  Scenario scenario;
  ScenarioSpans spans;
};

inline ScenarioFile parse_scenario_json(const Json& root) {
  if (!root.is_object()) throw ParseError("scenario root must be an object");
  detail::check_keys(root, "scenario", {"track", "start", "pmm", "cone", "wind", "sim",
                                        "tracker", "quad", "run"});
  ScenarioFile out;
  Scenario& sc = out.scenario;

  const Json& track = detail::require(root, "scenario", "track");
  detail::check_keys(track, "track", {"gates"});
  const Json& gates = detail::require(track, "track", "gates");
  if (!gates.is_array() || gates.empty()) {
    throw ParseError("track.gates must be a nonempty array");
  }
  int next_id = 0;
  for (const Json& jg : gates) {
    detail::check_keys(jg, "track.gates[]",
                       {"id", "center", "exit_dir", "pass_radius", "motion"});
    Gate g;
    g.id = detail::get_or<int>(jg, "id", next_id);
    g.center = detail::parse_vec3(detail::require(jg, "track.gates[]", "center"),
                                  "track.gates[].center");
    g.exit_dir = detail::parse_vec3(detail::require(jg, "track.gates[]", "exit_dir"),
                                    "track.gates[].exit_dir");
    const double norm = g.exit_dir.norm();
    if (norm < 1e-9) throw ParseError("track.gates[].exit_dir must be nonzero");
    g.exit_dir /= norm;
    g.pass_radius = detail::get_or<double>(jg, "pass_radius", 1.0);
    if (g.pass_radius <= 0.0) throw ParseError("track.gates[].pass_radius must be > 0");
    if (jg.contains("motion")) {
      double last_t = -std::numeric_limits<double>::infinity();
      for (const Json& jk : jg["motion"]) {
        detail::check_keys(jk, "track.gates[].motion[]", {"t", "offset"});
        GateMotionKnot knot;
        knot.t = detail::require(jk, "motion[]", "t").get<double>();
        knot.offset = detail::parse_vec3(detail::require(jk, "motion[]", "offset"),
                                         "motion[].offset");
        if (knot.t <= last_t) {
          throw ParseError("track.gates[].motion[] times must be strictly increasing");
        }
        last_t = knot.t;
        g.motion.knots.push_back(knot);
      }
    }
    sc.track.push_back(g);
    ++next_id;
  }

  if (root.contains("start")) {
    const Json& js = root["start"];
    detail::check_keys(js, "start", {"p", "v"});
    if (js.contains("p")) sc.start.p = detail::parse_vec3(js["p"], "start.p");
    if (js.contains("v")) sc.start.v = detail::parse_vec3(js["v"], "start.v");
  }

  if (root.contains("pmm")) {
    const Json& jp = root["pmm"];
    detail::check_keys(jp, "pmm", {"a_lo", "a_hi"});
    const Vec3 lo = jp.contains("a_lo") ? detail::parse_vec3(jp["a_lo"], "pmm.a_lo")
                                        : Vec3(-20.0, -20.0, -9.0);
    const Vec3 hi = jp.contains("a_hi") ? detail::parse_vec3(jp["a_hi"], "pmm.a_hi")
                                        : Vec3(20.0, 20.0, 25.0);
    for (int i = 0; i < 3; ++i) {
      sc.pmm_bounds[i] = AxisBounds{lo[i], hi[i]};
      if (!sc.pmm_bounds[i].valid()) {
        throw ParseError("pmm bounds must satisfy a_lo < 0 < a_hi per axis");
      }
    }
  }

  if (root.contains("cone")) {
    const Json& jc = root["cone"];
    detail::check_keys(jc, "cone",
                       {"v_min", "v_max", "yaw_span_deg", "pitch_span_deg", "s", "h_random"});
    sc.cone.v_min = detail::get_or<double>(jc, "v_min", 0.0);
    sc.cone.v_max = detail::get_or<double>(jc, "v_max", 20.0);
    out.spans.yaw_span_deg = detail::get_or<double>(jc, "yaw_span_deg", 120.0);
    out.spans.pitch_span_deg = detail::get_or<double>(jc, "pitch_span_deg", 90.0);
    sc.cone.s = detail::get_or<int>(jc, "s", 3);
    sc.h_random = detail::get_or<int>(jc, "h_random", 150);
  }
  sc.cone.yaw_max = 0.5 * out.spans.yaw_span_deg * detail::kDegToRad;
  sc.cone.yaw_min = -sc.cone.yaw_max;
  sc.cone.pitch_max = 0.5 * out.spans.pitch_span_deg * detail::kDegToRad;
  sc.cone.pitch_min = -sc.cone.pitch_max;
  if (!sc.cone.valid() || sc.h_random < 1) throw ParseError("invalid cone settings");

  if (root.contains("wind")) {
    for (const Json& jw : root["wind"]) {
      detail::check_keys(jw, "wind[]", {"box_min", "box_max", "force"});
      WindRegion region;
      region.box_min = detail::parse_vec3(detail::require(jw, "wind[]", "box_min"),
                                          "wind[].box_min");
      region.box_max = detail::parse_vec3(detail::require(jw, "wind[]", "box_max"),
                                          "wind[].box_max");
      region.force =
          detail::parse_vec3(detail::require(jw, "wind[]", "force"), "wind[].force");
      if ((region.box_max - region.box_min).minCoeff() <= 0.0) {
        throw ParseError("wind[].box_min must be below box_max per axis");
      }
      sc.wind.push_back(region);
    }
  }

  if (root.contains("sim")) {
    const Json& js = root["sim"];
    detail::check_keys(js, "sim", {"dt", "control_hz"});
    sc.sim_dt = detail::get_or<double>(js, "dt", 0.001);
    sc.control_hz = detail::get_or<int>(js, "control_hz", 100);
    if (sc.sim_dt <= 0.0 || sc.control_hz < 1) throw ParseError("invalid sim settings");
  }

  if (root.contains("tracker")) {
    const Json& jt = root["tracker"];
    detail::check_keys(jt, "tracker",
                       {"N", "dt", "weights", "v_theta_max", "dv_theta_max", "a_lo",
                        "a_hi", "attitude_p", "rate_p", "max_iterations"});
    sc.tracker.n_steps = detail::get_or<int>(jt, "N", 20);
    sc.tracker.dt = detail::get_or<double>(jt, "dt", 0.06);
    if (jt.contains("weights")) {
      const Json& jw = jt["weights"];
      detail::check_keys(jw, "tracker.weights", {"q_l", "q_c", "mu", "r_dv"});
      sc.tracker.q_l = detail::get_or<double>(jw, "q_l", 100.0);
      sc.tracker.q_c = detail::get_or<double>(jw, "q_c", 200.0);
      sc.tracker.mu = detail::get_or<double>(jw, "mu", 1.0);
      sc.tracker.r_dv = detail::get_or<double>(jw, "r_dv", 0.1);
    }
    sc.tracker.v_theta_max = detail::get_or<double>(jt, "v_theta_max", 25.0);
    const double dv_max = detail::get_or<double>(jt, "dv_theta_max", 2.0);
    sc.tracker.dv_theta_max = dv_max;
    sc.tracker.dv_theta_min = -dv_max;
    if (jt.contains("a_lo")) {
      sc.tracker.a_lo = detail::parse_vec3(jt["a_lo"], "tracker.a_lo");
    }
    if (jt.contains("a_hi")) {
      sc.tracker.a_hi = detail::parse_vec3(jt["a_hi"], "tracker.a_hi");
    }
    sc.gains.attitude_p = detail::get_or<double>(jt, "attitude_p", 10.0);
    sc.gains.rate_p = detail::get_or<double>(jt, "rate_p", 40.0);
    sc.tracker.max_iterations = detail::get_or<int>(jt, "max_iterations", 40);
    if (!sc.tracker.valid()) throw ParseError("invalid tracker settings");
  }

  if (root.contains("quad")) {
    const Json& jq = root["quad"];
    detail::check_keys(jq, "quad",
                       {"m", "inertia", "l", "c_tau", "u_min", "u_max", "drag"});
    sc.quad.mass = detail::get_or<double>(jq, "m", sc.quad.mass);
    if (jq.contains("inertia")) {
      sc.quad.inertia = detail::parse_vec3(jq["inertia"], "quad.inertia");
    }
    sc.quad.arm_length = detail::get_or<double>(jq, "l", sc.quad.arm_length);
    sc.quad.torque_const = detail::get_or<double>(jq, "c_tau", sc.quad.torque_const);
    sc.quad.thrust_min = detail::get_or<double>(jq, "u_min", sc.quad.thrust_min);
    sc.quad.thrust_max = detail::get_or<double>(jq, "u_max", sc.quad.thrust_max);
    if (jq.contains("drag")) sc.quad.drag = detail::parse_vec3(jq["drag"], "quad.drag");
    if (!sc.quad.valid()) throw ParseError("invalid quad parameters");
  }

  if (root.contains("run")) {
    const Json& jr = root["run"];
    detail::check_keys(jr, "run",
                       {"laps", "timeout", "replan_every", "gate_horizon",
                        "deterministic", "seed"});
    sc.laps = detail::get_or<int>(jr, "laps", 1);
    sc.timeout = detail::get_or<double>(jr, "timeout", 30.0);
    sc.replan_every = detail::get_or<int>(jr, "replan_every", 1);
    sc.gate_horizon = detail::get_or<int>(jr, "gate_horizon", 3);
    sc.deterministic = detail::get_or<bool>(jr, "deterministic", true);
    sc.seed = detail::get_or<std::uint64_t>(jr, "seed", 1);
  }

  if (!sc.valid()) throw ParseError("scenario fails validity checks");
  return out;
}

inline ScenarioFile parse_scenario(const std::string& filename) {
  std::ifstream in(filename);
  if (!in) throw ParseError("cannot open scenario file: " + filename);
  Json root;
  try {
    root = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("JSON parse failure in ") + filename + ": " + e.what());
  }
  try {
    return parse_scenario_json(root);
  } catch (const ParseError& e) {
    throw ParseError(filename + ": " + e.what());
  }
}

inline Json scenario_to_json(const ScenarioFile& file) {
  const Scenario& sc = file.scenario;
  Json root;
  Json gates = Json::array();
  for (const Gate& g : sc.track) {
    Json jg;
    jg["id"] = g.id;
    jg["center"] = detail::vec3_json(g.center);
    jg["exit_dir"] = detail::vec3_json(g.exit_dir);
    jg["pass_radius"] = g.pass_radius;
    if (!g.motion.empty()) {
      Json motion = Json::array();
      for (const auto& k : g.motion.knots) {
        motion.push_back({{"t", k.t}, {"offset", detail::vec3_json(k.offset)}});
      }
      jg["motion"] = motion;
    }
    gates.push_back(jg);
  }
  root["track"] = {{"gates", gates}};
  root["start"] = {{"p", detail::vec3_json(sc.start.p)},
                   {"v", detail::vec3_json(sc.start.v)}};
  root["pmm"] = {
      {"a_lo", Json::array({sc.pmm_bounds[0].u_lo, sc.pmm_bounds[1].u_lo,
                            sc.pmm_bounds[2].u_lo})},
      {"a_hi", Json::array({sc.pmm_bounds[0].u_hi, sc.pmm_bounds[1].u_hi,
                            sc.pmm_bounds[2].u_hi})}};
  root["cone"] = {{"v_min", sc.cone.v_min},
                  {"v_max", sc.cone.v_max},
                  {"yaw_span_deg", file.spans.yaw_span_deg},
                  {"pitch_span_deg", file.spans.pitch_span_deg},
                  {"s", sc.cone.s},
                  {"h_random", sc.h_random}};
  if (!sc.wind.empty()) {
    Json wind = Json::array();
    for (const auto& region : sc.wind) {
      wind.push_back({{"box_min", detail::vec3_json(region.box_min)},
                      {"box_max", detail::vec3_json(region.box_max)},
                      {"force", detail::vec3_json(region.force)}});
    }
    root["wind"] = wind;
  }
  root["sim"] = {{"dt", sc.sim_dt}, {"control_hz", sc.control_hz}};
  root["tracker"] = {{"N", sc.tracker.n_steps},
                     {"dt", sc.tracker.dt},
                     {"weights",
                      {{"q_l", sc.tracker.q_l},
                       {"q_c", sc.tracker.q_c},
                       {"mu", sc.tracker.mu},
                       {"r_dv", sc.tracker.r_dv}}},
                     {"v_theta_max", sc.tracker.v_theta_max},
                     {"dv_theta_max", sc.tracker.dv_theta_max},
                     {"a_lo", detail::vec3_json(sc.tracker.a_lo)},
                     {"a_hi", detail::vec3_json(sc.tracker.a_hi)},
                     {"attitude_p", sc.gains.attitude_p},
                     {"rate_p", sc.gains.rate_p},
                     {"max_iterations", sc.tracker.max_iterations}};
  root["quad"] = {{"m", sc.quad.mass},
                  {"inertia", detail::vec3_json(sc.quad.inertia)},
                  {"l", sc.quad.arm_length},
                  {"c_tau", sc.quad.torque_const},
                  {"u_min", sc.quad.thrust_min},
                  {"u_max", sc.quad.thrust_max},
                  {"drag", detail::vec3_json(sc.quad.drag)}};
  root["run"] = {{"laps", sc.laps},
                 {"timeout", sc.timeout},
                 {"replan_every", sc.replan_every},
                 {"gate_horizon", sc.gate_horizon},
                 {"deterministic", sc.deterministic},
                 {"seed", sc.seed}};
  return root;
}

inline Json episode_result_to_json(const EpisodeResult& result) {
  Json j;
  j["outcome"] = to_string(result.outcome);
  if (!result.error.empty()) j["error"] = result.error;
  j["metrics"] = {{"lap_time", result.metrics.lap_time},
                  {"avg_contour_error", result.metrics.avg_contour_error},
                  {"avg_plan_start_contour_error",
                   result.metrics.avg_plan_start_contour_error},
                  {"avg_progress_rate", result.metrics.avg_progress_rate},
                  {"max_gate_deviation", result.metrics.max_gate_deviation},
                  {"gates_passed", result.metrics.gates_passed},
                  {"gates_missed", result.metrics.gates_missed},
                  {"replans", result.metrics.replans},
                  {"planning_edges", result.metrics.planning_edges}};
  Json passes = Json::array();
  for (const auto& p : result.gate_passes) {
    passes.push_back({{"gate_id", p.gate_id},
                      {"lap", p.lap},
                      {"time", p.time},
                      {"deviation", p.deviation},
                      {"hit", p.hit}});
  }
  j["gate_passes"] = passes;
  return j;
}

inline Json plan_to_json(const PmmPlan& plan) {
  Json j;
  j["total_time"] = plan.total_time;
  Json velocities = Json::array();
  for (const auto& v : plan.gate_velocities) velocities.push_back(detail::vec3_json(v));
  j["gate_velocities"] = velocities;
  Json segments = Json::array();
  for (const auto& seg : plan.segments) {
    segments.push_back(
        {{"duration", seg.duration},
         {"alpha", Json::array({seg.alpha[0], seg.alpha[1], seg.alpha[2]})},
         {"start_p", detail::vec3_json(seg.start_position())},
         {"start_v", detail::vec3_json(seg.start_velocity())},
         {"end_p", detail::vec3_json(seg.end_position())},
         {"end_v", detail::vec3_json(seg.end_velocity())}});
  }
  j["segments"] = segments;
  return j;
}

inline Json bench_report_to_json(const BenchReport& report) {
  Json j;
  j["query_count"] = report.query_count;
  j["total_wall_random_ms"] = report.total_wall_random_ms;
  j["total_wall_refocus_ms"] = report.total_wall_refocus_ms;
  j["mean_wall_random_ms"] = report.mean_wall_random_ms;
  j["mean_wall_refocus_ms"] = report.mean_wall_refocus_ms;
  j["max_wall_random_ms"] = report.max_wall_random_ms;
  j["max_wall_refocus_ms"] = report.max_wall_refocus_ms;
  j["total_edges_random"] = report.total_edges_random;
  j["total_edges_refocus"] = report.total_edges_refocus;
  j["refocus_within_1pct"] = report.refocus_within_1pct;
  Json seeds = Json::array();
  for (const auto& sb : report.seeds) {
    Json queries = Json::array();
    for (const auto& q : sb.queries) {
      queries.push_back({{"t_ref", q.t_ref},
                         {"time_random", q.time_random},
                         {"time_refocus", q.time_refocus},
                         {"wall_random_ms", q.wall_random_ms},
                         {"wall_refocus_ms", q.wall_refocus_ms},
                         {"edges_random", q.edges_random},
                         {"edges_refocus", q.edges_refocus},
                         {"refocus_iterations", q.refocus_iterations}});
    }
    seeds.push_back({{"seed", sb.seed}, {"queries", queries}});
  }
  j["seeds"] = seeds;
  return j;
}

}  // namespace replan
