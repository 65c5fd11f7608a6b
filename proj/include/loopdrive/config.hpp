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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "loopdrive/infraction.hpp"
#include "loopdrive/pid.hpp"
#include "loopdrive/planner.hpp"
#include "loopdrive/protocol.hpp"
#include "loopdrive/sim.hpp"

namespace loopdrive {

inline constexpr int kConfigSchemaVersion = 1;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TargetMode { refreshed, fixed };

struct HarnessConfig {
  double dt = 0.1;
  int planner_cadence = 5;  // ticks between planner queries
  bool attention_prefix = true;
  PromptStyle prompt_style;
  int reuse_last_plan_max = 3;
  std::optional<double> timeout_s;   // overrides the per-length rule when set
  double timeout_s_per_100m = 120.0;
  double waypoint_dt = 0.5;
  double lookahead = 20.0;
  TargetMode target_mode = TargetMode::refreshed;
  double route_horizon = 60.0;       // m of centreline included in scene records
  std::int64_t deadline_ms = 2000;
  std::uint64_t seed = 0;
  double normalize_per = 10.0;
  DetectorConfig detector;
  PenaltyTable penalties = PenaltyTable::leaderboard();
  ControllerConfig controller;
  VehicleParams vehicle;
  OracleConfig oracle;

  double timeout_for(double route_length) const {
    return timeout_s ? *timeout_s : timeout_s_per_100m * route_length / 100.0;
  }

  /// Copies shared timing and footprint values into the nested blocks.
  HarnessConfig resolved() const {
    HarnessConfig c = *this;
    c.controller.dt = dt;
    c.controller.waypoint_dt = waypoint_dt;
    c.oracle.waypoint_dt = waypoint_dt;
    c.oracle.ego_half_length = vehicle.half_length;
    c.oracle.ego_half_width = vehicle.half_width;
    return c;
  }

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (planner_cadence < 1) throw ConfigError("planner_cadence must be >= 1");
    if (reuse_last_plan_max < 0) throw ConfigError("fallback.reuse_last_plan_max must be >= 0");
    if (timeout_s && !(*timeout_s > 0.0)) throw ConfigError("timeout_s must be positive");
    if (!(timeout_s_per_100m > 0.0)) throw ConfigError("timeout_s_per_100m must be positive");
    if (!(waypoint_dt > 0.0)) throw ConfigError("waypoint_dt must be positive");
    if (!(vehicle.wheelbase > 0.0)) throw ConfigError("vehicle.wheelbase must be positive");
    if (controller.brake_speed_threshold < 0.0 || controller.max_target_speed < 0.0) {
      throw ConfigError("controller thresholds must be non-negative");
    }
    for (auto k : kAllInfractionKinds) {
      if (!penalties.contains(k)) throw ConfigError("penalties." + std::string(to_string(k)) + " missing");
    }
  }
};

namespace detail {

inline nlohmann::json gains_json(const PidGains& g) {
  return {{"kp", g.kp}, {"ki", g.ki}, {"kd", g.kd}, {"integral_limit", g.integral_limit}};
}
inline PidGains gains_from(const nlohmann::json& j) {
  return {j.at("kp").get<double>(), j.at("ki").get<double>(), j.at("kd").get<double>(),
          j.at("integral_limit").get<double>()};
}

/// Every key of `given` must exist in `schema`; objects are checked recursively.
inline void check_keys(const nlohmann::json& given, const nlohmann::json& schema, const std::string& path) {
  if (!given.is_object() || !schema.is_object()) return;
  for (const auto& [k, v] : given.items()) {
    const std::string here = path.empty() ? k : path + "." + k;
    if (!schema.contains(k)) throw ConfigError("unknown config key '" + here + "'");
    check_keys(v, schema.at(k), here);
  }
}

}  // namespace detail

inline nlohmann::json to_json(const HarnessConfig& c) {
  nlohmann::json pen = nlohmann::json::object();
  for (const auto& [k, v] : c.penalties.entries()) pen[std::string(to_string(k))] = v;
  nlohmann::json aim = nlohmann::json::array();
  for (auto i : c.controller.aim_indices) aim.push_back(i);
  return {
      {"schema_version", kConfigSchemaVersion},
      {"dt", c.dt},
      {"planner_cadence", c.planner_cadence},
      {"attention_prefix", c.attention_prefix},
      {"prefix_wording", c.prompt_style.prefix == PrefixWording::violate ? "violate" : "break"},
      {"prompt_wording", c.prompt_style.body == PromptWording::waypoint ? "waypoint" : "point"},
      {"fallback", {{"reuse_last_plan_max", c.reuse_last_plan_max}}},
      {"timeout_s", c.timeout_s ? nlohmann::json(*c.timeout_s) : nlohmann::json(nullptr)},
      {"timeout_s_per_100m", c.timeout_s_per_100m},
      {"waypoint_dt", c.waypoint_dt},
      {"lookahead", c.lookahead},
      {"target_mode", c.target_mode == TargetMode::refreshed ? "refreshed" : "fixed"},
      {"route_horizon", c.route_horizon},
      {"deadline_ms", c.deadline_ms},
      {"seed", c.seed},
      {"normalize_per", c.normalize_per},
      {"detector",
       {{"blocked_speed", c.detector.blocked_speed},
        {"t_block", c.detector.block_time},
        {"deviation_distance", c.detector.deviation_distance},
        {"collision_rearm", c.detector.collision_rearm}}},
      {"penalties", pen},
      {"controller",
       {{"heading", detail::gains_json(c.controller.heading)},
        {"speed", detail::gains_json(c.controller.speed)},
        {"aim_indices", aim},
        {"brake_speed_threshold", c.controller.brake_speed_threshold},
        {"max_target_speed", c.controller.max_target_speed}}},
      {"vehicle",
       {{"wheelbase", c.vehicle.wheelbase},
        {"max_accel", c.vehicle.max_accel},
        {"max_brake", c.vehicle.max_brake},
        {"max_wheel_angle", c.vehicle.max_wheel_angle},
        {"drag", c.vehicle.drag},
        {"half_length", c.vehicle.half_length},
        {"half_width", c.vehicle.half_width}}},
      {"oracle",
       {{"comfort_decel", c.oracle.comfort_decel},
        {"yellow_decel", c.oracle.yellow_decel},
        {"stop_margin", c.oracle.stop_margin},
        {"max_speed", c.oracle.max_speed},
        {"hazard_margin", c.oracle.hazard_margin},
        {"hazard_gap", c.oracle.hazard_gap},
        {"prediction_horizon", c.oracle.prediction_horizon},
        {"prediction_step", c.oracle.prediction_step}}},
  };
}

/// Merges `j` over the defaults. Unknown keys are rejected by name.
inline HarnessConfig config_from_json(const nlohmann::json& j) {
  const nlohmann::json defaults = to_json(HarnessConfig{});
  detail::check_keys(j, defaults, "");
  if (j.contains("schema_version") && j.at("schema_version") != kConfigSchemaVersion) {
    throw ConfigError("unsupported config schema_version " + j.at("schema_version").dump());
  }
  nlohmann::json m = defaults;
  m.merge_patch(j);
  HarnessConfig c;
  try {
    c.dt = m.at("dt").get<double>();
    c.planner_cadence = m.at("planner_cadence").get<int>();
    c.attention_prefix = m.at("attention_prefix").get<bool>();
    const auto pw = m.at("prefix_wording").get<std::string>();
    if (pw != "violate" && pw != "break") throw ConfigError("prefix_wording must be 'violate' or 'break'");
    c.prompt_style.prefix = pw == "violate" ? PrefixWording::violate : PrefixWording::break_rules;
    const auto bw = m.at("prompt_wording").get<std::string>();
    if (bw != "waypoint" && bw != "point") throw ConfigError("prompt_wording must be 'waypoint' or 'point'");
    c.prompt_style.body = bw == "waypoint" ? PromptWording::waypoint : PromptWording::point;
    c.reuse_last_plan_max = m.at("fallback").at("reuse_last_plan_max").get<int>();
    if (m.contains("timeout_s") && !m.at("timeout_s").is_null()) c.timeout_s = m.at("timeout_s").get<double>();
    c.timeout_s_per_100m = m.at("timeout_s_per_100m").get<double>();
    c.waypoint_dt = m.at("waypoint_dt").get<double>();
    c.lookahead = m.at("lookahead").get<double>();
    const auto tm = m.at("target_mode").get<std::string>();
    if (tm != "refreshed" && tm != "fixed") throw ConfigError("target_mode must be 'refreshed' or 'fixed'");
    c.target_mode = tm == "refreshed" ? TargetMode::refreshed : TargetMode::fixed;
    c.route_horizon = m.at("route_horizon").get<double>();
    c.deadline_ms = m.at("deadline_ms").get<std::int64_t>();
    c.seed = m.at("seed").get<std::uint64_t>();
    c.normalize_per = m.at("normalize_per").get<double>();
    const auto& d = m.at("detector");
    c.detector = {d.at("blocked_speed").get<double>(), d.at("t_block").get<double>(),
                  d.at("deviation_distance").get<double>(), d.at("collision_rearm").get<double>()};
    c.penalties = PenaltyTable{};
    for (const auto& [k, v] : m.at("penalties").items()) {
      if (v.is_null()) continue;
      c.penalties.set(infraction_kind_from_string(k), v.get<double>());
    }
    const auto& ct = m.at("controller");
    c.controller.heading = detail::gains_from(ct.at("heading"));
    c.controller.speed = detail::gains_from(ct.at("speed"));
    c.controller.aim_indices = ct.at("aim_indices").get<std::vector<std::size_t>>();
    c.controller.brake_speed_threshold = ct.at("brake_speed_threshold").get<double>();
    c.controller.max_target_speed = ct.at("max_target_speed").get<double>();
    const auto& v = m.at("vehicle");
    c.vehicle = {v.at("wheelbase").get<double>(),       v.at("max_accel").get<double>(),
                 v.at("max_brake").get<double>(),       v.at("max_wheel_angle").get<double>(),
                 v.at("drag").get<double>(),            v.at("half_length").get<double>(),
                 v.at("half_width").get<double>()};
    const auto& o = m.at("oracle");
    c.oracle.comfort_decel = o.at("comfort_decel").get<double>();
    c.oracle.yellow_decel = o.at("yellow_decel").get<double>();
    c.oracle.stop_margin = o.at("stop_margin").get<double>();
    c.oracle.max_speed = o.at("max_speed").get<double>();
    c.oracle.hazard_margin = o.at("hazard_margin").get<double>();
    c.oracle.hazard_gap = o.at("hazard_gap").get<double>();
    c.oracle.prediction_horizon = o.at("prediction_horizon").get<double>();
    c.oracle.prediction_step = o.at("prediction_step").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline HarnessConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
}

/// Applies "dotted.key=value" overrides. The value is read as JSON when it
/// parses, otherwise as a string. The key must exist in the config schema.
inline HarnessConfig apply_overrides(const HarnessConfig& base, const std::vector<std::string>& overrides) {
  nlohmann::json j = to_json(base);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
    const std::string key = o.substr(0, eq);
    const std::string raw = o.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    nlohmann::json::json_pointer ptr;
    std::size_t start = 0;
    for (;;) {
      const auto dot = key.find('.', start);
      ptr /= key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    if (!j.contains(ptr)) throw ConfigError("unknown config key '" + key + "'");
    j[ptr] = value;
  }
  return config_from_json(j);
}

}  // namespace loopdrive
