// Copyright 2026 The loopdrive Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "loopdrive/protocol.hpp"
#include "loopdrive/route.hpp"
#include "loopdrive/sim.hpp"

namespace loopdrive {

inline constexpr std::size_t kFrameWindow = 5;

/// NPC as observed in the current ego frame. yaw is relative to the ego
/// heading, counterclockwise.
struct SceneNpc {
  std::string id;
  NpcKind kind = NpcKind::vehicle;
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  double half_length = 0.0;
  double half_width = 0.0;
};

struct SceneLight {
  std::string id;
  LightPhase phase = LightPhase::green;
  Vec2 stop_start;  // ego frame
  Vec2 stop_end;
};

struct SceneFrame {
  std::int64_t tick = 0;
  std::vector<SceneNpc> npcs;
  std::vector<SceneLight> lights;
};

/// Structured observation handed to a planner in place of camera frames.
/// Every frame of the window is expressed in the ego frame of the request
/// tick, so positions across frames are directly comparable.
struct SceneRecord {
  double ego_speed = 0.0;
  double speed_limit = 0.0;
  double dt = 0.1;
  double route_remaining = 0.0;   // m of route left past the ego
  std::vector<Vec2> route_ahead;  // centreline from the ego projection, ego frame
  std::vector<SceneFrame> frames; // oldest first, always kFrameWindow long
};

struct PlannerRequest {
  std::string episode_id;
  std::int64_t tick = 0;
  std::string prompt;
  SceneRecord scene;
  std::int64_t deadline_ms = 1000;
};

struct PlannerResponse {
  std::string episode_id;
  std::int64_t tick = 0;
  std::string text;
  double latency_ms = 0.0;
};

class PlannerTimeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class PlannerDisconnected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Planner {
 public:
  virtual ~Planner() = default;
  /// May throw PlannerTimeout or PlannerDisconnected.
  virtual PlannerResponse plan(const PlannerRequest& request) = 0;
};

using PlannerFactory = std::function<std::unique_ptr<Planner>()>;

// ---------------------------------------------------------------------------
// JSON encoding shared by the wire protocol and trace files.

inline nlohmann::json to_json(Vec2 v) { return nlohmann::json::array({v.x, v.y}); }
inline Vec2 vec2_from_json(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

inline nlohmann::json to_json(const SceneRecord& s) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : s.frames) {
    nlohmann::json npcs = nlohmann::json::array();
    for (const auto& n : f.npcs) {
      npcs.push_back({{"id", n.id},
                      {"kind", std::string(to_string(n.kind))},
                      {"x", n.x},
                      {"y", n.y},
                      {"yaw", n.yaw},
                      {"half_length", n.half_length},
                      {"half_width", n.half_width}});
    }
    nlohmann::json lights = nlohmann::json::array();
    for (const auto& l : f.lights) {
      lights.push_back({{"id", l.id},
                        {"phase", std::string(to_string(l.phase))},
                        {"stop_line", {to_json(l.stop_start), to_json(l.stop_end)}}});
    }
    frames.push_back({{"tick", f.tick}, {"npcs", npcs}, {"lights", lights}});
  }
  nlohmann::json route = nlohmann::json::array();
  for (const auto& p : s.route_ahead) route.push_back(to_json(p));
  return {{"ego_speed", s.ego_speed}, {"speed_limit", s.speed_limit}, {"dt", s.dt},
          {"route_remaining", s.route_remaining}, {"route_ahead", route}, {"frames", frames}};
}

inline SceneRecord scene_from_json(const nlohmann::json& j) {
  SceneRecord s;
  s.ego_speed = j.at("ego_speed").get<double>();
  s.speed_limit = j.at("speed_limit").get<double>();
  s.dt = j.at("dt").get<double>();
  s.route_remaining = j.at("route_remaining").get<double>();
  for (const auto& p : j.at("route_ahead")) s.route_ahead.push_back(vec2_from_json(p));
  for (const auto& jf : j.at("frames")) {
    SceneFrame f;
    f.tick = jf.at("tick").get<std::int64_t>();
    for (const auto& n : jf.at("npcs")) {
      f.npcs.push_back({n.at("id").get<std::string>(), npc_kind_from_string(n.at("kind").get<std::string>()),
                        n.at("x").get<double>(), n.at("y").get<double>(), n.at("yaw").get<double>(),
                        n.at("half_length").get<double>(), n.at("half_width").get<double>()});
    }
    for (const auto& l : jf.at("lights")) {
      f.lights.push_back({l.at("id").get<std::string>(), light_phase_from_string(l.at("phase").get<std::string>()),
                          vec2_from_json(l.at("stop_line").at(0)), vec2_from_json(l.at("stop_line").at(1))});
    }
    s.frames.push_back(std::move(f));
  }
  return s;
}

inline nlohmann::json to_json(const PlannerRequest& r) {
  return {{"type", "request"},   {"episode_id", r.episode_id},   {"tick", r.tick},
          {"prompt", r.prompt},  {"scene", to_json(r.scene)},    {"deadline_ms", r.deadline_ms}};
}

inline PlannerRequest request_from_json(const nlohmann::json& j) {
  return {j.at("episode_id").get<std::string>(), j.at("tick").get<std::int64_t>(), j.at("prompt").get<std::string>(),
          scene_from_json(j.at("scene")), j.at("deadline_ms").get<std::int64_t>()};
}

inline nlohmann::json to_json(const PlannerResponse& r) {
  return {{"type", "response"}, {"episode_id", r.episode_id}, {"tick", r.tick}, {"text", r.text}};
}

inline PlannerResponse response_from_json(const nlohmann::json& j) {
  return {j.at("episode_id").get<std::string>(), j.at("tick").get<std::int64_t>(), j.at("text").get<std::string>(),
          0.0};
}

// ---------------------------------------------------------------------------
// Rule-based autopilot.

/// Rules of the reference autopilot. Distances in metres, rates in m/s^2.
struct OracleConfig {
  double comfort_decel = 2.0;       // profile used to stop for lights and hazards
  double yellow_decel = 4.0;        // a yellow is run only if stopping needs more than this
  double stop_margin = 3.5;         // ego centre halts this far before a stop line
  double max_speed = 8.0;           // cruise is min(speed limit, max_speed)
  double waypoint_dt = 0.5;         // s between planned waypoints
  double hazard_margin = 1.0;       // extra corridor half-width around the ego
  double hazard_gap = 2.0;          // bumper gap kept to a predicted conflict point
  double prediction_horizon = 3.0;  // s of constant-velocity NPC prediction
  double prediction_step = 0.25;    // s
  double ego_half_length = 2.4;
  double ego_half_width = 1.0;
  bool obey_lights = true;
  bool yield_to_hazards = true;
};

/// Distance along `path` to the first place it crosses the directed segment
/// (a -> b) from its left side to its right side; nullopt if it never does.
inline std::optional<double> crossing_arc(const RouteSpec& path, Vec2 a, Vec2 b) {
  const Vec2 d = b - a;
  const auto& pts = path.points();
  const auto& cum = path.arc_lengths();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 p = pts[i];
    const Vec2 q = pts[i + 1];
    const double cp = cross(d, p - a);
    const double cq = cross(d, q - a);
    if (!(cp > 0.0 && cq <= 0.0)) continue;
    if (!segments_intersect(p, q, a, b)) continue;
    const double u = cp / (cp - cq);
    return cum[i] + u * (cum[i + 1] - cum[i]);
  }
  return std::nullopt;
}

/// Builds the ego-frame route polyline of a scene record.
inline std::optional<RouteSpec> scene_path(const SceneRecord& scene) {
  std::vector<Vec2> pts;
  for (const auto& p : scene.route_ahead) {
    if (pts.empty() || norm(p - pts.back()) > 1e-9) pts.push_back(p);
  }
  if (pts.size() < 2) return std::nullopt;
  return RouteSpec("ahead", std::move(pts), std::max(scene.speed_limit, 1e-3));
}

class OraclePlanner : public Planner {
 public:
  explicit OraclePlanner(OracleConfig cfg = {}) : cfg_(cfg) {}

  /// Ego-frame plan for a scene, before text encoding.
  Trajectory plan_trajectory(const SceneRecord& scene) const {
    const auto path = scene_path(scene);
    if (!path) return Trajectory{};
    const double cruise = std::min(scene.speed_limit, cfg_.max_speed);
    const double stop = stop_distance(scene, *path);
    const auto speeds = stop_profile_speeds(cruise, stop, cfg_.comfort_decel, cfg_.waypoint_dt);
    Trajectory out;
    double s = 0.0;
    for (std::size_t k = 0; k < kTrajectoryLength; ++k) {
      s += speeds[k] * cfg_.waypoint_dt;
      out[k] = to_target(path->point_at(s));
    }
    return out;
  }

  PlannerResponse plan(const PlannerRequest& req) override {
    return {req.episode_id, req.tick, format_answer(quantize(plan_trajectory(req.scene))), 0.0};
  }

  /// Arc length ahead at which the ego must be stationary; +inf when free.
  double stop_distance(const SceneRecord& scene, const RouteSpec& path) const {
    double stop = std::numeric_limits<double>::infinity();
    if (scene.frames.empty()) return stop;
    const SceneFrame& now = scene.frames.back();
    const double v = scene.ego_speed;

    if (cfg_.obey_lights) {
      for (const auto& light : now.lights) {
        if (light.phase == LightPhase::green) continue;
        const auto arc = crossing_arc(path, light.stop_start, light.stop_end);
        if (!arc || *arc <= 0.0) continue;
        const double halt = *arc - cfg_.stop_margin;
        if (light.phase == LightPhase::yellow && halt < v * v / (2.0 * cfg_.yellow_decel)) continue;
        stop = std::min(stop, std::max(0.0, halt));
      }
    }

    if (cfg_.yield_to_hazards) {
      const SceneFrame& old = scene.frames.front();
      for (const auto& npc : now.npcs) {
        Vec2 vel{0.0, 0.0};
        for (const auto& o : old.npcs) {
          if (o.id == npc.id && now.tick > old.tick) {
            const double span = static_cast<double>(now.tick - old.tick) * scene.dt;
            vel = (1.0 / span) * (Vec2{npc.x, npc.y} - Vec2{o.x, o.y});
          }
        }
        const double radius = std::hypot(npc.half_length, npc.half_width);
        const double corridor = cfg_.ego_half_width + radius + cfg_.hazard_margin;
        for (double tau = 0.0; tau <= cfg_.prediction_horizon + 1e-9; tau += cfg_.prediction_step) {
          const Vec2 q = Vec2{npc.x, npc.y} + tau * vel;
          const auto proj = project_to_route(path, Pose2D{q.x, q.y, 0.0});
          if (proj.s <= 0.0 || proj.s >= path.length() || std::abs(proj.lateral_offset) >= corridor) continue;
          stop = std::min(stop, std::max(0.0, proj.s - (cfg_.ego_half_length + radius + cfg_.hazard_gap)));
        }
      }
    }
    return stop;
  }

  const OracleConfig& config() const { return cfg_; }

 private:
  OracleConfig cfg_;
};

/// Answers with five copies of (0, 0): a plan to stand still.
class StopperPlanner : public Planner {
 public:
  PlannerResponse plan(const PlannerRequest& req) override {
    return {req.episode_id, req.tick, format_answer(Trajectory{}), 0.0};
  }
};

/// Answers with empty text.
class MutePlanner : public Planner {
 public:
  PlannerResponse plan(const PlannerRequest& req) override { return {req.episode_id, req.tick, "", 0.0}; }
};

/// Plays back recorded responses in order; a recorded timeout is re-raised.
struct TranscriptEntry {
  std::int64_t tick = 0;
  std::string text;
  bool timeout = false;
};

class TranscriptPlanner : public Planner {
 public:
  explicit TranscriptPlanner(std::vector<TranscriptEntry> entries) : entries_(std::move(entries)) {}

  PlannerResponse plan(const PlannerRequest& req) override {
    if (next_ >= entries_.size()) throw PlannerDisconnected("transcript exhausted at tick " + std::to_string(req.tick));
    const TranscriptEntry& e = entries_[next_++];
    if (e.tick != req.tick) {
      throw PlannerDisconnected("transcript expects tick " + std::to_string(e.tick) + ", got " +
                                std::to_string(req.tick));
    }
    if (e.timeout) throw PlannerTimeout("recorded timeout at tick " + std::to_string(e.tick));
    return {req.episode_id, req.tick, e.text, 0.0};
  }

 private:
  std::vector<TranscriptEntry> entries_;
  std::size_t next_ = 0;
};

inline const std::vector<std::string>& fault_planner_names() {
  static const std::vector<std::string> names{"red-light-runner", "collider", "stopper", "mute"};
  return names;
}

/// Resolves "oracle" or "faults:<name>" to a factory of in-process planners.
inline PlannerFactory make_planner_factory(const std::string& selector, const OracleConfig& oracle = {}) {
  if (selector == "oracle") return [oracle] { return std::make_unique<OraclePlanner>(oracle); };
  const std::string prefix = "faults:";
  if (selector.rfind(prefix, 0) == 0) {
    const std::string name = selector.substr(prefix.size());
    if (name == "red-light-runner") {
      OracleConfig c = oracle;
      c.obey_lights = false;
      return [c] { return std::make_unique<OraclePlanner>(c); };
    }
    if (name == "collider") {
      OracleConfig c = oracle;
      c.yield_to_hazards = false;
      return [c] { return std::make_unique<OraclePlanner>(c); };
    }
    if (name == "stopper") return [] { return std::make_unique<StopperPlanner>(); };
    if (name == "mute") return [] { return std::make_unique<MutePlanner>(); };
  }
  throw std::invalid_argument("unknown planner '" + selector + "'");
}

}  // namespace loopdrive
