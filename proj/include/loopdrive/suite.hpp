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
#include <numbers>
#include <string>
#include <vector>

#include "loopdrive/route.hpp"
#include "loopdrive/scenario.hpp"
#include "loopdrive/sim.hpp"

namespace loopdrive::suite {

/// Polyline builder: straight runs and constant-radius arcs.
class PathBuilder {
 public:
  PathBuilder(Vec2 start, double heading) : pts_{start}, heading_(heading) {}

  PathBuilder& straight(double length, double step = 10.0) {
    const int n = std::max(1, static_cast<int>(std::ceil(length / step)));
    const Vec2 origin = pts_.back();
    const Vec2 dir{std::cos(heading_), std::sin(heading_)};
    for (int i = 1; i <= n; ++i) pts_.push_back(origin + (length * i / n) * dir);
    return *this;
  }

  /// Positive angle turns left (counterclockwise).
  PathBuilder& arc(double radius, double angle, double step_angle = std::numbers::pi / 90.0) {
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(angle) / step_angle)));
    const double side = angle > 0 ? 1.0 : -1.0;
    const Vec2 origin = pts_.back();
    const Vec2 centre = origin + radius * Vec2{-side * std::sin(heading_), side * std::cos(heading_)};
    const double start = std::atan2(origin.y - centre.y, origin.x - centre.x);
    for (int i = 1; i <= n; ++i) {
      const double a = start + angle * i / n;
      pts_.push_back(centre + radius * Vec2{std::cos(a), std::sin(a)});
    }
    heading_ += angle;
    return *this;
  }

  std::vector<Vec2> points() const { return pts_; }

 private:
  std::vector<Vec2> pts_;
  double heading_;
};

inline Scenario make_scenario(std::string id, std::vector<Vec2> pts, double speed_limit) {
  Scenario s;
  s.id = id;
  s.route = RouteSpec(std::move(id), std::move(pts), speed_limit);
  s.ego_spawn = {s.route.points()[0].x, s.route.points()[0].y, s.route.heading_at(0.0)};
  return s;
}

/// Light whose stop line crosses the route at arc s, spanning half_width to
/// each side and directed so route traffic crosses it left to right.
inline TrafficLight light_at(const RouteSpec& route, std::string id, double s, std::vector<PhaseSpan> schedule,
                             double offset = 0.0, double half_width = 4.0) {
  const Vec2 p = route.point_at(s);
  const double h = route.heading_at(s);
  const Vec2 left{-std::sin(h), std::cos(h)};
  TrafficLight l;
  l.id = std::move(id);
  l.stop_start = p - half_width * left;
  l.stop_end = p + half_width * left;
  l.schedule = std::move(schedule);
  l.offset = offset;
  return l;
}

/// NPC moving at constant velocity between two poses over [t0, t1].
inline NpcAgent mover(std::string id, NpcKind kind, Vec2 from, Vec2 to, double t0, double t1, double half_length,
                      double half_width) {
  NpcAgent n;
  n.id = std::move(id);
  n.kind = kind;
  n.half_length = half_length;
  n.half_width = half_width;
  const double yaw = std::atan2(to.y - from.y, to.x - from.x);
  n.script.keys = {{t0, {from.x, from.y, yaw}}, {t1, {to.x, to.y, yaw}}};
  n.pose = n.script.keys.front().pose;
  return n;
}

inline NpcAgent parked(std::string id, NpcKind kind, Pose2D pose, double half_length, double half_width) {
  NpcAgent n;
  n.id = std::move(id);
  n.kind = kind;
  n.pose = pose;
  n.half_length = half_length;
  n.half_width = half_width;
  return n;
}

constexpr double kDeg = std::numbers::pi / 180.0;

/// Ten routes the rule-based autopilot should finish with no infraction.
inline std::vector<Scenario> smoke_suite() {
  using P = PhaseSpan;
  constexpr auto G = LightPhase::green;
  constexpr auto Y = LightPhase::yellow;
  constexpr auto R = LightPhase::red;
  std::vector<Scenario> out;

  out.push_back(make_scenario("smoke_01_straight", PathBuilder({0, 0}, 0).straight(200).points(), 6.0));
  out.push_back(make_scenario("smoke_02_diagonal", PathBuilder({10, -20}, 30 * kDeg).straight(150).points(), 7.0));
  out.push_back(make_scenario("smoke_03_left_curve",
                              PathBuilder({0, 0}, 0).straight(30).arc(25, 90 * kDeg).straight(40).points(), 5.0));
  out.push_back(make_scenario("smoke_04_right_curve",
                              PathBuilder({0, 0}, 90 * kDeg).straight(30).arc(25, -90 * kDeg).straight(40).points(), 5.0));
  out.push_back(make_scenario(
      "smoke_05_s_curve",
      PathBuilder({0, 0}, 0).straight(20).arc(30, 45 * kDeg).arc(30, -45 * kDeg).straight(40).points(), 5.0));

  {
    auto s = make_scenario("smoke_06_light_red_start", PathBuilder({0, 0}, 0).straight(150).points(), 6.0);
    s.lights.push_back(light_at(s.route, "L1", 60.0, {P{R, 15.0}, P{G, 20.0}, P{Y, 3.0}}));
    out.push_back(std::move(s));
  }
  {
    auto s = make_scenario("smoke_07_light_cycle", PathBuilder({0, 0}, 0).straight(160).points(), 6.0);
    s.lights.push_back(light_at(s.route, "L1", 80.0, {P{G, 10.0}, P{Y, 3.0}, P{R, 10.0}}));
    out.push_back(std::move(s));
  }
  {
    auto s = make_scenario("smoke_08_two_lights",
                           PathBuilder({0, 0}, 0).straight(90).arc(40, 30 * kDeg).straight(100).points(), 6.0);
    s.lights.push_back(light_at(s.route, "L1", 70.0, {P{G, 6.0}, P{Y, 3.0}, P{R, 12.0}}));
    s.lights.push_back(light_at(s.route, "L2", 170.0, {P{R, 8.0}, P{G, 8.0}, P{Y, 3.0}}, 4.0));
    out.push_back(std::move(s));
  }
  {
    auto s = make_scenario("smoke_09_pedestrian_crossing", PathBuilder({0, 0}, 0).straight(150).points(), 6.0);
    s.npcs.push_back(mover("ped1", NpcKind::pedestrian, {70, -8}, {70, 8}, 8.0, 8.0 + 16.0 / 1.4, 0.3, 0.3));
    out.push_back(std::move(s));
  }
  {
    auto s = make_scenario("smoke_10_vehicle_crossing", PathBuilder({0, 0}, 0).straight(200).points(), 6.0);
    s.npcs.push_back(mover("car1", NpcKind::vehicle, {100, -60}, {100, 60}, 10.0, 25.0, 2.2, 0.9));
    s.npcs.push_back(parked("parked1", NpcKind::vehicle, {50, 7, 0}, 2.2, 0.9));
    out.push_back(std::move(s));
  }
  return out;
}

/// Companion scenario of a fault planner.
inline Scenario fault_scenario(const std::string& planner) {
  using P = PhaseSpan;
  if (planner == "red-light-runner") {
    auto s = make_scenario("fault_red_light", PathBuilder({0, 0}, 0).straight(120).points(), 6.0);
    s.lights.push_back(light_at(s.route, "L1", 50.0, {P{LightPhase::red, 60.0}, P{LightPhase::green, 60.0}}));
    return s;
  }
  if (planner == "collider") {
    auto s = make_scenario("fault_collision", PathBuilder({0, 0}, 0).straight(150).points(), 6.0);
    s.npcs.push_back(mover("car1", NpcKind::vehicle, {80, -40}, {80, 40}, 9.1, 19.1, 2.2, 0.9));
    return s;
  }
  if (planner == "stopper" || planner == "mute") {
    return make_scenario("fault_blocked", PathBuilder({0, 0}, 0).straight(100).points(), 6.0);
  }
  throw std::invalid_argument("no companion scenario for '" + planner + "'");
}

}  // namespace loopdrive::suite
