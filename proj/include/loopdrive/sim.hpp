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
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "loopdrive/geometry.hpp"

namespace loopdrive {

/// Kinematic bicycle parameters and the ego footprint.
struct VehicleParams {
  double wheelbase = 2.9;       // m
  double max_accel = 3.0;       // m/s^2 at full throttle
  double max_brake = 8.0;       // m/s^2 at full brake
  double max_wheel_angle = 0.6; // rad at |steer| = 1
  double drag = 0.1;            // 1/s, linear in speed
  double half_length = 2.4;     // m
  double half_width = 1.0;      // m
};

struct EgoState {
  Pose2D pose;
  double speed = 0.0;  // m/s, longitudinal, never negative
  double wheelbase = 2.9;
};

/// Actuation in normalized units. steer is positive to the right.
struct ControlCommand {
  double steer = 0.0;
  double throttle = 0.0;
  double brake = 0.0;

  /// Clamps every channel; brake wins when both pedals are requested.
  static ControlCommand make(double steer, double throttle, double brake) {
    ControlCommand c;
    c.steer = std::clamp(std::isfinite(steer) ? steer : 0.0, -1.0, 1.0);
    c.throttle = std::clamp(std::isfinite(throttle) ? throttle : 0.0, 0.0, 1.0);
    c.brake = std::clamp(std::isfinite(brake) ? brake : 1.0, 0.0, 1.0);
    if (c.brake > 0.0) c.throttle = 0.0;
    return c;
  }
  static ControlCommand emergency_brake() { return make(0.0, 0.0, 1.0); }

  friend bool operator==(const ControlCommand&, const ControlCommand&) = default;
};

enum class NpcKind { vehicle, pedestrian, static_object };

inline std::string_view to_string(NpcKind k) {
  switch (k) {
    case NpcKind::vehicle: return "vehicle";
    case NpcKind::pedestrian: return "pedestrian";
    case NpcKind::static_object: return "static";
  }
  return "vehicle";
}

inline NpcKind npc_kind_from_string(std::string_view s) {
  if (s == "vehicle") return NpcKind::vehicle;
  if (s == "pedestrian") return NpcKind::pedestrian;
  if (s == "static") return NpcKind::static_object;
  throw std::invalid_argument("unknown npc kind '" + std::string(s) + "'");
}

/// Pose keyframe of an NPC script; t in seconds from episode start.
struct Keyframe {
  double t = 0.0;
  Pose2D pose;
};

/// Piecewise-linear pose schedule. Holds the first pose before the first
/// keyframe and the last pose after the last, so every tick is defined.
struct PoseScript {
  std::vector<Keyframe> keys;

  Pose2D at(double t) const {
    if (keys.empty()) return {};
    if (t <= keys.front().t) return keys.front().pose;
    if (t >= keys.back().t) return keys.back().pose;
    const auto it = std::upper_bound(keys.begin(), keys.end(), t,
                                     [](double v, const Keyframe& k) { return v < k.t; });
    const Keyframe& b = *it;
    const Keyframe& a = *(it - 1);
    const double u = (t - a.t) / (b.t - a.t);
    return {a.pose.x + u * (b.pose.x - a.pose.x), a.pose.y + u * (b.pose.y - a.pose.y),
            normalize_angle(a.pose.yaw + u * normalize_angle(b.pose.yaw - a.pose.yaw))};
  }
};

struct NpcAgent {
  std::string id;
  NpcKind kind = NpcKind::vehicle;
  Pose2D pose;
  double half_length = 2.2;
  double half_width = 0.9;
  PoseScript script;

  OrientedBox box() const { return {pose, half_length, half_width}; }
};

enum class LightPhase { red, yellow, green };

inline std::string_view to_string(LightPhase p) {
  switch (p) {
    case LightPhase::red: return "red";
    case LightPhase::yellow: return "yellow";
    case LightPhase::green: return "green";
  }
  return "red";
}

inline LightPhase light_phase_from_string(std::string_view s) {
  if (s == "red") return LightPhase::red;
  if (s == "yellow") return LightPhase::yellow;
  if (s == "green") return LightPhase::green;
  throw std::invalid_argument("unknown light phase '" + std::string(s) + "'");
}

struct PhaseSpan {
  LightPhase phase = LightPhase::green;
  double duration = 1.0;  // s
};

/// A signal regulating traffic that crosses its directed stop line from the
/// left side of (start -> end) to the right side.
struct TrafficLight {
  std::string id;
  Vec2 stop_start;
  Vec2 stop_end;
  std::vector<PhaseSpan> schedule;
  double offset = 0.0;  // s added to simulated time before the lookup

  double cycle_length() const {
    double c = 0.0;
    for (const auto& p : schedule) c += p.duration;
    return c;
  }
};

namespace detail {
inline std::int64_t to_micros(double seconds) { return std::llround(seconds * 1e6); }
}  // namespace detail

/// Phase at simulated time tick*dt. Time is quantized to microseconds so
/// phase boundaries do not depend on floating accumulation.
inline LightPhase light_phase(const TrafficLight& light, std::int64_t tick, double dt) {
  if (light.schedule.empty()) return LightPhase::green;
  std::int64_t cycle = 0;
  for (const auto& p : light.schedule) cycle += detail::to_micros(p.duration);
  if (cycle <= 0) return light.schedule.front().phase;
  std::int64_t t = detail::to_micros(static_cast<double>(tick) * dt) + detail::to_micros(light.offset);
  t %= cycle;
  if (t < 0) t += cycle;
  for (const auto& p : light.schedule) {
    const std::int64_t d = detail::to_micros(p.duration);
    if (t < d) return p.phase;
    t -= d;
  }
  return light.schedule.back().phase;
}

struct WorldState {
  std::int64_t tick = 0;
  double dt = 0.1;
  EgoState ego;
  VehicleParams vehicle;
  std::vector<NpcAgent> npcs;
  std::vector<TrafficLight> lights;
  std::uint64_t rng_seed = 0;

  double time() const { return static_cast<double>(tick) * dt; }
  OrientedBox ego_box() const { return {ego.pose, vehicle.half_length, vehicle.half_width}; }
};

/// Places every NPC at its scripted pose for the world's current tick.
inline void sync_npcs(WorldState& world) {
  for (auto& npc : world.npcs) {
    if (!npc.script.keys.empty()) npc.pose = npc.script.at(world.time());
  }
}

/// Advances the world by one tick under the kinematic bicycle model.
inline WorldState step_world(const WorldState& world, const ControlCommand& cmd) {
  WorldState next = world;
  const VehicleParams& v = world.vehicle;
  const double dt = world.dt;
  EgoState& ego = next.ego;

  const double accel = v.max_accel * cmd.throttle - v.max_brake * cmd.brake - v.drag * ego.speed;
  ego.speed = std::max(0.0, ego.speed + accel * dt);
  // Front-wheel angle is counterclockwise-positive; steer is right-positive.
  const double wheel = -v.max_wheel_angle * cmd.steer;
  ego.pose.yaw = normalize_angle(ego.pose.yaw + (ego.speed / ego.wheelbase) * std::tan(wheel) * dt);
  ego.pose.x += ego.speed * std::cos(ego.pose.yaw) * dt;
  ego.pose.y += ego.speed * std::sin(ego.pose.yaw) * dt;

  next.tick = world.tick + 1;
  sync_npcs(next);
  return next;
}

struct Contact {
  std::string npc_id;
  NpcKind kind = NpcKind::vehicle;
  friend bool operator==(const Contact&, const Contact&) = default;
};

/// Every NPC whose box intersects the ego box, in NPC list order.
inline std::vector<Contact> check_collisions(const WorldState& world) {
  std::vector<Contact> out;
  const OrientedBox ego = world.ego_box();
  for (const auto& npc : world.npcs) {
    if (intersects(ego, npc.box())) out.push_back({npc.id, npc.kind});
  }
  return out;
}

namespace detail {
inline void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}
inline void fnv_mix(std::uint64_t& h, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  fnv_mix(h, &bits, sizeof bits);
}
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = kFnvOffset;
  fnv_mix(h, s.data(), s.size());
  return h;
}
}  // namespace detail

/// Bit-level hash of the dynamic world state.
inline std::uint64_t world_hash(const WorldState& w) {
  std::uint64_t h = detail::kFnvOffset;
  detail::fnv_mix(h, &w.tick, sizeof w.tick);
  detail::fnv_mix(h, w.ego.pose.x);
  detail::fnv_mix(h, w.ego.pose.y);
  detail::fnv_mix(h, w.ego.pose.yaw);
  detail::fnv_mix(h, w.ego.speed);
  for (const auto& n : w.npcs) {
    detail::fnv_mix(h, n.id.data(), n.id.size());
    detail::fnv_mix(h, n.pose.x);
    detail::fnv_mix(h, n.pose.y);
    detail::fnv_mix(h, n.pose.yaw);
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
    v >>= 4;
  }
  return s;
}

}  // namespace loopdrive
