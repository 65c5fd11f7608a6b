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
#include <numbers>

namespace loopdrive {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double k) { return {k * a.x, k * a.y}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

/// World-frame pose. x east, y north, yaw counterclockwise from +x.
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  constexpr Vec2 position() const { return {x, y}; }
  Vec2 heading() const { return {std::cos(yaw), std::sin(yaw)}; }
  friend constexpr bool operator==(const Pose2D&, const Pose2D&) = default;
};

/// Ego-frame coordinates: x lateral (positive to the right of the heading),
/// y longitudinal (positive ahead).
inline Vec2 world_to_ego(const Pose2D& ego, Vec2 world) {
  const Vec2 d = world - ego.position();
  const double c = std::cos(ego.yaw);
  const double s = std::sin(ego.yaw);
  return {d.x * s - d.y * c, d.x * c + d.y * s};
}

inline Vec2 ego_to_world(const Pose2D& ego, Vec2 local) {
  const double c = std::cos(ego.yaw);
  const double s = std::sin(ego.yaw);
  return {ego.x + local.x * s + local.y * c, ego.y - local.x * c + local.y * s};
}

/// Oriented bounding box given by centre pose and half extents.
struct OrientedBox {
  Pose2D pose;
  double half_length = 0.0;
  double half_width = 0.0;

  std::array<Vec2, 4> corners() const {
    const Vec2 f = pose.heading();
    const Vec2 l{-f.y, f.x};
    const Vec2 c = pose.position();
    const Vec2 a = half_length * f;
    const Vec2 b = half_width * l;
    return {c + a + b, c - a + b, c - a - b, c + a - b};
  }

  double circumradius() const { return std::hypot(half_length, half_width); }
};

/// Separating-axis test on the four face normals of two rectangles.
/// Touching boxes count as intersecting.
inline bool intersects(const OrientedBox& a, const OrientedBox& b) {
  const Vec2 d = b.pose.position() - a.pose.position();
  if (norm(d) > a.circumradius() + b.circumradius()) return false;

  const Vec2 af = a.pose.heading();
  const Vec2 bf = b.pose.heading();
  const std::array<Vec2, 4> axes{af, Vec2{-af.y, af.x}, bf, Vec2{-bf.y, bf.x}};
  const Vec2 al{-af.y, af.x};
  const Vec2 bl{-bf.y, bf.x};
  for (const Vec2& axis : axes) {
    const double ra = a.half_length * std::abs(dot(af, axis)) + a.half_width * std::abs(dot(al, axis));
    const double rb = b.half_length * std::abs(dot(bf, axis)) + b.half_width * std::abs(dot(bl, axis));
    if (std::abs(dot(d, axis)) > ra + rb) return false;
  }
  return true;
}

/// Proper or touching intersection of segments [p1,p2] and [q1,q2].
inline bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
  const auto orient = [](Vec2 a, Vec2 b, Vec2 c) { return cross(b - a, c - a); };
  const double d1 = orient(q1, q2, p1);
  const double d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1);
  const double d4 = orient(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  const auto on_segment = [](Vec2 a, Vec2 b, Vec2 c) {
    return std::min(a.x, b.x) <= c.x && c.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= c.y &&
           c.y <= std::max(a.y, b.y);
  };
  if (d1 == 0 && on_segment(q1, q2, p1)) return true;
  if (d2 == 0 && on_segment(q1, q2, p2)) return true;
  if (d3 == 0 && on_segment(p1, p2, q1)) return true;
  if (d4 == 0 && on_segment(p1, p2, q2)) return true;
  return false;
}

}  // namespace loopdrive
