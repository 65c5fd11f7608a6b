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

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "loopdrive/route.hpp"
#include "loopdrive/sim.hpp"

namespace loopdrive {

enum class InfractionKind {
  collision_pedestrian,
  collision_vehicle,
  collision_static,
  red_light,
  agent_blocked,
  route_deviation,
};

inline constexpr std::array<InfractionKind, 6> kAllInfractionKinds{
    InfractionKind::collision_pedestrian, InfractionKind::collision_vehicle, InfractionKind::collision_static,
    InfractionKind::red_light,            InfractionKind::agent_blocked,     InfractionKind::route_deviation};

inline std::string_view to_string(InfractionKind k) {
  switch (k) {
    case InfractionKind::collision_pedestrian: return "collision_pedestrian";
    case InfractionKind::collision_vehicle: return "collision_vehicle";
    case InfractionKind::collision_static: return "collision_static";
    case InfractionKind::red_light: return "red_light";
    case InfractionKind::agent_blocked: return "agent_blocked";
    case InfractionKind::route_deviation: return "route_deviation";
  }
  return "route_deviation";
}

inline InfractionKind infraction_kind_from_string(std::string_view s) {
  for (auto k : kAllInfractionKinds) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown infraction kind '" + std::string(s) + "'");
}

struct InfractionEvent {
  InfractionKind kind = InfractionKind::collision_vehicle;
  std::int64_t tick = 0;
  std::string detail;
  friend bool operator==(const InfractionEvent&, const InfractionEvent&) = default;
};

class MissingPenalty : public std::runtime_error {
 public:
  explicit MissingPenalty(InfractionKind k)
      : std::runtime_error("no penalty multiplier for '" + std::string(to_string(k)) + "'"), kind(k) {}
  InfractionKind kind;
};

/// Multiplier per infraction kind, each in (0, 1].
class PenaltyTable {
 public:
  PenaltyTable() = default;

  /// Leaderboard coefficients for the collision and red-light kinds.
  /// Blocked and deviation events end the route instead of scaling IS.
  static PenaltyTable leaderboard() {
    PenaltyTable t;
    t.set(InfractionKind::collision_pedestrian, 0.50);
    t.set(InfractionKind::collision_vehicle, 0.60);
    t.set(InfractionKind::collision_static, 0.65);
    t.set(InfractionKind::red_light, 0.70);
    t.set(InfractionKind::agent_blocked, 1.0);
    t.set(InfractionKind::route_deviation, 1.0);
    return t;
  }

  void set(InfractionKind k, double multiplier) {
    if (!(multiplier > 0.0 && multiplier <= 1.0)) {
      throw std::invalid_argument("penalty for '" + std::string(to_string(k)) + "' must be in (0, 1]");
    }
    table_[k] = multiplier;
  }
  void erase(InfractionKind k) { table_.erase(k); }

  double at(InfractionKind k) const {
    const auto it = table_.find(k);
    if (it == table_.end()) throw MissingPenalty(k);
    return it->second;
  }
  bool contains(InfractionKind k) const { return table_.count(k) != 0; }
  const std::map<InfractionKind, double>& entries() const { return table_; }

 private:
  std::map<InfractionKind, double> table_;
};

/// Product of the multipliers of every event; 1.0 for no events. Each
/// partial product is snapped to a 1e-12 decimal grid so that decimal
/// coefficients compose exactly (0.7 * 0.7 gives 0.49, not 0.48999999999999994).
inline double infraction_score(std::span<const InfractionEvent> events, const PenaltyTable& table) {
  double score = 1.0;
  for (const auto& e : events) {
    const double raw = score * table.at(e.kind);
    const double snapped = std::round(raw * 1e12) / 1e12;
    score = snapped > 0.0 ? snapped : raw;
  }
  return score;
}

struct DetectorConfig {
  double blocked_speed = 0.1;        // m/s
  double block_time = 90.0;          // s stationary before agent_blocked
  double deviation_distance = 8.0;   // m lateral offset
  double collision_rearm = 1.0;      // s contact-free before a collision re-fires
};

/// True when p moves from the left of (a -> b) to its right, crossing the segment.
inline bool crosses_stop_line(Vec2 prev, Vec2 cur, Vec2 a, Vec2 b) {
  const Vec2 d = b - a;
  return cross(d, prev - a) > 0.0 && cross(d, cur - a) <= 0.0 && segments_intersect(prev, cur, a, b);
}

/// Per-episode detector. Emits at most one event per contiguous violation.
class InfractionDetector {
 public:
  explicit InfractionDetector(DetectorConfig cfg = {}) : cfg_(cfg) {}

  std::vector<InfractionEvent> detect(const WorldState& prev, const WorldState& cur, const RouteProjection& proj) {
    std::vector<InfractionEvent> out;
    const std::int64_t tick = cur.tick;

    for (const auto& light : cur.lights) {
      if (light_phase(light, cur.tick, cur.dt) != LightPhase::red) continue;
      if (crosses_stop_line(prev.ego.pose.position(), cur.ego.pose.position(), light.stop_start, light.stop_end)) {
        out.push_back({InfractionKind::red_light, tick, "light " + light.id});
      }
    }

    const auto rearm_ticks = static_cast<std::int64_t>(std::llround(cfg_.collision_rearm / cur.dt));
    const auto contacts = check_collisions(cur);
    for (const auto& npc : cur.npcs) {
      auto& st = contact_[npc.id];
      bool touching = false;
      for (const auto& c : contacts) touching = touching || c.npc_id == npc.id;
      if (touching) {
        if (!st.ever || st.free_ticks >= rearm_ticks) {
          out.push_back({collision_kind(npc.kind), tick, "npc " + npc.id});
        }
        st.ever = true;
        st.free_ticks = 0;
      } else if (st.ever) {
        ++st.free_ticks;
      }
    }

    const auto block_ticks = static_cast<std::int64_t>(std::llround(cfg_.block_time / cur.dt));
    if (cur.ego.speed < cfg_.blocked_speed) {
      ++stationary_ticks_;
      if (stationary_ticks_ == block_ticks) {
        out.push_back({InfractionKind::agent_blocked, tick, "stationary " + std::to_string(cfg_.block_time) + " s"});
      }
    } else {
      stationary_ticks_ = 0;
    }

    const bool deviating = std::abs(proj.lateral_offset) > cfg_.deviation_distance;
    if (deviating && !deviating_) {
      out.push_back({InfractionKind::route_deviation, tick, "lateral offset " + std::to_string(proj.lateral_offset)});
    }
    deviating_ = deviating;
    return out;
  }

  static InfractionKind collision_kind(NpcKind k) {
    switch (k) {
      case NpcKind::pedestrian: return InfractionKind::collision_pedestrian;
      case NpcKind::static_object: return InfractionKind::collision_static;
      case NpcKind::vehicle: return InfractionKind::collision_vehicle;
    }
    return InfractionKind::collision_vehicle;
  }

  const DetectorConfig& config() const { return cfg_; }

 private:
  struct ContactState {
    bool ever = false;
    std::int64_t free_ticks = 0;
  };

  DetectorConfig cfg_;
  std::map<std::string, ContactState> contact_;
  std::int64_t stationary_ticks_ = 0;
  bool deviating_ = false;
};

}  // namespace loopdrive
