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

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "loopdrive/route.hpp"
#include "loopdrive/sim.hpp"

namespace loopdrive {

inline constexpr int kScenarioSchemaVersion = 1;

class ScenarioInvalid : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Scenario {
  std::string id;
  std::array<double, 4> extent{-1000.0, -1000.0, 1000.0, 1000.0};  // xmin, ymin, xmax, ymax
  RouteSpec route;
  Pose2D ego_spawn;
  double ego_speed = 0.0;
  std::vector<NpcAgent> npcs;
  std::vector<TrafficLight> lights;

  /// World at tick 0 with NPCs placed on their scripts.
  WorldState initial_world(const VehicleParams& vehicle, double dt, std::uint64_t seed) const {
    WorldState w;
    w.dt = dt;
    w.vehicle = vehicle;
    w.ego.pose = ego_spawn;
    w.ego.speed = ego_speed;
    w.ego.wheelbase = vehicle.wheelbase;
    w.npcs = npcs;
    w.lights = lights;
    w.rng_seed = seed;
    sync_npcs(w);
    return w;
  }
};

inline void validate(const Scenario& s) {
  const auto fail = [&](const std::string& what) { throw ScenarioInvalid("scenario '" + s.id + "': " + what); };
  if (s.id.empty()) throw ScenarioInvalid("scenario without id");
  if (s.route.points().size() < 2) fail("route missing");
  if (!(s.ego_speed >= 0.0)) fail("negative ego speed");
  for (const auto& n : s.npcs) {
    if (!(n.half_length > 0.0 && n.half_width > 0.0)) fail("npc '" + n.id + "' extents must be positive");
    for (std::size_t i = 1; i < n.script.keys.size(); ++i) {
      if (!(n.script.keys[i].t > n.script.keys[i - 1].t)) fail("npc '" + n.id + "' script times must increase");
    }
  }
  for (const auto& l : s.lights) {
    if (l.schedule.empty()) fail("light '" + l.id + "' has no phases");
    for (const auto& p : l.schedule) {
      if (!(p.duration > 0.0)) fail("light '" + l.id + "' phase durations must be positive");
    }
    if (norm(l.stop_end - l.stop_start) <= 0.0) fail("light '" + l.id + "' stop line is degenerate");
  }
}

inline nlohmann::json to_json(const RouteSpec& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points()) pts.push_back({p.x, p.y});
  return {{"id", r.id()}, {"points", pts}, {"speed_limit", r.speed_limit()}, {"target_spacing", r.target_spacing()}};
}

inline RouteSpec route_from_json(const nlohmann::json& j, const std::string& fallback_id) {
  std::vector<Vec2> pts;
  for (const auto& p : j.at("points")) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  try {
    return RouteSpec(j.value("id", fallback_id), std::move(pts), j.at("speed_limit").get<double>(),
                     j.value("target_spacing", 50.0));
  } catch (const std::invalid_argument& e) {
    throw ScenarioInvalid(e.what());
  }
}

inline nlohmann::json to_json(const Scenario& s) {
  nlohmann::json npcs = nlohmann::json::array();
  for (const auto& n : s.npcs) {
    nlohmann::json script = nlohmann::json::array();
    for (const auto& k : n.script.keys) script.push_back({{"t", k.t}, {"x", k.pose.x}, {"y", k.pose.y}, {"yaw", k.pose.yaw}});
    nlohmann::json jn{{"id", n.id},
                      {"kind", std::string(to_string(n.kind))},
                      {"half_length", n.half_length},
                      {"half_width", n.half_width},
                      {"script", script}};
    if (n.script.keys.empty()) jn["pose"] = {{"x", n.pose.x}, {"y", n.pose.y}, {"yaw", n.pose.yaw}};
    npcs.push_back(jn);
  }
  nlohmann::json lights = nlohmann::json::array();
  for (const auto& l : s.lights) {
    nlohmann::json phases = nlohmann::json::array();
    for (const auto& p : l.schedule) phases.push_back({{"phase", std::string(to_string(p.phase))}, {"duration", p.duration}});
    lights.push_back({{"id", l.id},
                      {"stop_line", {{l.stop_start.x, l.stop_start.y}, {l.stop_end.x, l.stop_end.y}}},
                      {"phases", phases},
                      {"offset", l.offset}});
  }
  return {{"schema", "loopdrive.scenario"},
          {"version", kScenarioSchemaVersion},
          {"id", s.id},
          {"map", {{"extent", s.extent}}},
          {"route", to_json(s.route)},
          {"ego", {{"x", s.ego_spawn.x}, {"y", s.ego_spawn.y}, {"yaw", s.ego_spawn.yaw}, {"speed", s.ego_speed}}},
          {"npcs", npcs},
          {"lights", lights}};
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioInvalid("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioInvalid("'" + path.string() + "': " + e.what());
  }
}

inline RouteSpec load_route(const std::filesystem::path& path) {
  const auto j = read_json_file(path);
  if (j.value("schema", "") != "loopdrive.route") throw ScenarioInvalid("'" + path.string() + "' is not a route file");
  if (j.value("version", 0) != kScenarioSchemaVersion) throw ScenarioInvalid("'" + path.string() + "': unsupported version");
  return route_from_json(j, path.stem().string());
}

/// Parses a scenario object. base_dir resolves a relative "route_file".
inline Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  Scenario s;
  try {
    if (j.value("schema", "") != "loopdrive.scenario") throw ScenarioInvalid("not a loopdrive.scenario document");
    if (j.value("version", 0) != kScenarioSchemaVersion) {
      throw ScenarioInvalid("unsupported scenario version " + std::to_string(j.value("version", 0)));
    }
    s.id = j.at("id").get<std::string>();
    if (j.contains("map")) s.extent = j.at("map").at("extent").get<std::array<double, 4>>();
    if (j.contains("route_file")) {
      s.route = load_route(base_dir / j.at("route_file").get<std::string>());
    } else {
      s.route = route_from_json(j.at("route"), s.id);
    }
    if (j.contains("ego")) {
      const auto& e = j.at("ego");
      s.ego_spawn = {e.at("x").get<double>(), e.at("y").get<double>(), normalize_angle(e.at("yaw").get<double>())};
      s.ego_speed = e.value("speed", 0.0);
    } else {
      s.ego_spawn = {s.route.points()[0].x, s.route.points()[0].y, s.route.heading_at(0.0)};
    }
    for (const auto& jn : j.value("npcs", nlohmann::json::array())) {
      NpcAgent n;
      n.id = jn.at("id").get<std::string>();
      n.kind = npc_kind_from_string(jn.at("kind").get<std::string>());
      n.half_length = jn.at("half_length").get<double>();
      n.half_width = jn.at("half_width").get<double>();
      for (const auto& k : jn.value("script", nlohmann::json::array())) {
        n.script.keys.push_back({k.at("t").get<double>(),
                                 {k.at("x").get<double>(), k.at("y").get<double>(), k.value("yaw", 0.0)}});
      }
      if (jn.contains("pose")) {
        const auto& p = jn.at("pose");
        n.pose = {p.at("x").get<double>(), p.at("y").get<double>(), p.value("yaw", 0.0)};
      }
      s.npcs.push_back(std::move(n));
    }
    for (const auto& jl : j.value("lights", nlohmann::json::array())) {
      TrafficLight l;
      l.id = jl.at("id").get<std::string>();
      const auto& line = jl.at("stop_line");
      l.stop_start = {line.at(0).at(0).get<double>(), line.at(0).at(1).get<double>()};
      l.stop_end = {line.at(1).at(0).get<double>(), line.at(1).at(1).get<double>()};
      for (const auto& p : jl.at("phases")) {
        l.schedule.push_back({light_phase_from_string(p.at("phase").get<std::string>()), p.at("duration").get<double>()});
      }
      l.offset = jl.value("offset", 0.0);
      s.lights.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioInvalid("scenario '" + s.id + "': " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ScenarioInvalid("scenario '" + s.id + "': " + e.what());
  }
  validate(s);
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  try {
    return scenario_from_json(read_json_file(path), path.parent_path());
  } catch (const ScenarioInvalid& e) {
    throw ScenarioInvalid(path.string() + ": " + e.what());
  }
}

/// All *.json scenario files of a directory, sorted by file name.
inline std::vector<Scenario> load_scenario_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ScenarioInvalid("'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Scenario> out;
  for (const auto& f : files) {
    const auto j = read_json_file(f);
    if (j.value("schema", "") == "loopdrive.route") continue;
    out.push_back(load_scenario(f));
  }
  if (out.empty()) throw ScenarioInvalid("no scenarios in '" + dir.string() + "'");
  return out;
}

}  // namespace loopdrive
