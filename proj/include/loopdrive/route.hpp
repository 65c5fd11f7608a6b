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
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "loopdrive/geometry.hpp"
#include "loopdrive/sim.hpp"

namespace loopdrive {

/// Ego-frame point: x lateral (right-positive), y longitudinal (ahead-positive).
struct TargetWaypoint {
  double x = 0.0;
  double y = 0.0;
  friend constexpr bool operator==(const TargetWaypoint&, const TargetWaypoint&) = default;
};

inline constexpr std::size_t kTrajectoryLength = 5;
using Trajectory = std::array<TargetWaypoint, kTrajectoryLength>;

class RouteSpec {
 public:
  RouteSpec() = default;

  /// Throws std::invalid_argument unless the polyline has at least two
  /// points, no repeated consecutive points, and positive length.
  RouteSpec(std::string id, std::vector<Vec2> points, double speed_limit, double target_spacing = 50.0)
      : id_(std::move(id)), points_(std::move(points)), speed_limit_(speed_limit), target_spacing_(target_spacing) {
    if (points_.size() < 2) throw std::invalid_argument("route '" + id_ + "' needs at least 2 points");
    cum_.assign(points_.size(), 0.0);
    for (std::size_t i = 1; i < points_.size(); ++i) {
      const double len = norm(points_[i] - points_[i - 1]);
      if (!(len > 0.0)) throw std::invalid_argument("route '" + id_ + "' has repeated consecutive points");
      cum_[i] = cum_[i - 1] + len;
    }
    if (!(speed_limit_ > 0.0)) throw std::invalid_argument("route '" + id_ + "' needs a positive speed limit");
    if (!(target_spacing_ > 0.0)) throw std::invalid_argument("route '" + id_ + "' needs a positive target spacing");
  }

  const std::string& id() const { return id_; }
  const std::vector<Vec2>& points() const { return points_; }
  const std::vector<double>& arc_lengths() const { return cum_; }
  double length() const { return cum_.empty() ? 0.0 : cum_.back(); }
  double speed_limit() const { return speed_limit_; }
  double target_spacing() const { return target_spacing_; }
  std::size_t segment_count() const { return points_.size() - 1; }

  /// Segment index containing arc length s (clamped to the route).
  std::size_t segment_at(double s) const {
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    std::size_t i = it == cum_.begin() ? 0 : static_cast<std::size_t>(it - cum_.begin()) - 1;
    return std::min(i, segment_count() - 1);
  }

  Vec2 direction(std::size_t seg) const {
    const Vec2 d = points_[seg + 1] - points_[seg];
    return (1.0 / norm(d)) * d;
  }

  /// Point at arc length s. Beyond either end the first or last segment is
  /// extended in a straight line.
  Vec2 point_at(double s) const {
    if (s >= length()) return points_.back() + (s - length()) * direction(segment_count() - 1);
    if (s <= 0.0) return points_.front() + s * direction(0);
    const std::size_t i = segment_at(s);
    return points_[i] + (s - cum_[i]) * direction(i);
  }

  double heading_at(double s) const {
    const Vec2 d = direction(segment_at(std::clamp(s, 0.0, length())));
    return std::atan2(d.y, d.x);
  }

 private:
  std::string id_;
  std::vector<Vec2> points_;
  std::vector<double> cum_;
  double speed_limit_ = 0.0;
  double target_spacing_ = 50.0;
};

struct RouteProjection {
  double s = 0.0;               // arc length of the closest point
  double lateral_offset = 0.0;  // m, distance to the nearest route point, positive to the left
};

/// Closest point on the route among arc lengths in [s_min, s_min + window],
/// with the first and last segments extended past the route ends. s stays
/// within [0, length].
inline RouteProjection project_to_route(const RouteSpec& route, const Pose2D& pose, double s_min,
                                        double window) {
  const Vec2 p = pose.position();
  const auto& pts = route.points();
  const auto& cum = route.arc_lengths();
  const double s_max = s_min + window;
  double best_d2 = std::numeric_limits<double>::infinity();
  RouteProjection best{std::clamp(s_min, 0.0, route.length()), 0.0};
  for (std::size_t i = 0; i < route.segment_count(); ++i) {
    if (cum[i + 1] < s_min || cum[i] > s_max) continue;
    const Vec2 a = pts[i];
    const Vec2 d = pts[i + 1] - a;
    const double len = cum[i + 1] - cum[i];
    // The end segments continue straight past the route ends.
    const double inf = std::numeric_limits<double>::infinity();
    const double lo = (i == 0 && s_min <= 0.0) ? -inf : std::max(0.0, (s_min - cum[i]) / len);
    const double hi = (i + 1 == route.segment_count() && s_max >= route.length()) ? inf
                                                                                  : std::min(1.0, (s_max - cum[i]) / len);
    const double t = std::clamp(dot(p - a, d) / dot(d, d), lo, hi);
    const Vec2 foot = a + t * d;
    const Vec2 r = p - foot;
    const double d2 = dot(r, r);
    if (d2 < best_d2) {
      best_d2 = d2;
      best.s = t >= 1.0 ? cum[i + 1] : (t <= 0.0 ? cum[i] : cum[i] + t * len);
      best.lateral_offset = std::copysign(std::sqrt(d2), cross(d, r));
    }
  }
  return best;
}

/// Unrestricted nearest-point projection.
inline RouteProjection project_to_route(const RouteSpec& route, const Pose2D& pose) {
  return project_to_route(route, pose, 0.0, std::numeric_limits<double>::infinity());
}

/// Monotone projection: the tracked arc length never decreases, so routes
/// that loop back near themselves cannot make progress jump backwards.
class RouteTracker {
 public:
  explicit RouteTracker(const RouteSpec& route, double window = 30.0) : route_(&route), window_(window) {}

  RouteProjection reset(const Pose2D& pose) {
    last_ = project_to_route(*route_, pose);
    return last_;
  }

  RouteProjection update(const Pose2D& pose) {
    last_ = project_to_route(*route_, pose, last_.s, window_);
    return last_;
  }

  const RouteProjection& last() const { return last_; }

 private:
  const RouteSpec* route_;
  double window_;
  RouteProjection last_;
};

/// Percentage of route length covered at arc length s, clamped to [0, 100].
inline double route_completion(const RouteSpec& route, double s) {
  return std::clamp(100.0 * s / route.length(), 0.0, 100.0);
}

inline TargetWaypoint to_target(Vec2 local) { return {local.x, local.y}; }

/// Route point lookahead metres past s_ego (clamped to the route end), in
/// the ego frame.
inline TargetWaypoint next_target(const RouteSpec& route, const EgoState& ego, double s_ego, double lookahead) {
  const double s = std::min(s_ego + lookahead, route.length());
  return to_target(world_to_ego(ego.pose, route.point_at(s)));
}

inline TargetWaypoint next_target(const RouteSpec& route, const EgoState& ego, double lookahead) {
  return next_target(route, ego, project_to_route(route, ego.pose).s, lookahead);
}

/// Five ego-frame centreline points at s plus the running sum of
/// speed_k * waypoint_dt.
inline Trajectory oracle_waypoints(const RouteSpec& route, const EgoState& ego, double s_ego,
                                   const std::array<double, kTrajectoryLength>& speeds, double waypoint_dt = 0.5) {
  Trajectory out;
  double s = s_ego;
  for (std::size_t k = 0; k < kTrajectoryLength; ++k) {
    s += speeds[k] * waypoint_dt;
    out[k] = to_target(world_to_ego(ego.pose, route.point_at(s)));
  }
  return out;
}

inline Trajectory oracle_waypoints(const RouteSpec& route, const EgoState& ego,
                                   const std::array<double, kTrajectoryLength>& speeds, double waypoint_dt = 0.5) {
  return oracle_waypoints(route, ego, project_to_route(route, ego.pose).s, speeds, waypoint_dt);
}

/// Speeds that cruise at `cruise` but decelerate at `decel` so the planned
/// arc never passes `stop_distance` metres ahead.
inline std::array<double, kTrajectoryLength> stop_profile_speeds(double cruise, double stop_distance, double decel,
                                                                 double waypoint_dt) {
  std::array<double, kTrajectoryLength> v{};
  double travelled = 0.0;
  for (std::size_t k = 0; k < kTrajectoryLength; ++k) {
    const double remaining = std::max(0.0, stop_distance - travelled);
    const double cap = std::sqrt(2.0 * decel * remaining);
    const double step = std::min(std::min(cruise, cap) * waypoint_dt, remaining);
    v[k] = step / waypoint_dt;
    travelled += step;
  }
  return v;
}

}  // namespace loopdrive
