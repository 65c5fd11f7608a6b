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
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "loopdrive/route.hpp"
#include "loopdrive/sim.hpp"

namespace loopdrive {

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double integral_limit = 10.0;
};

struct PidState {
  PidGains gains;
  double integral = 0.0;
  double prev_error = 0.0;
};

/// One PID update. The integral is clamped to +/- integral_limit before it
/// contributes to the output.
inline std::pair<double, PidState> pid_step(const PidState& state, double error, double dt) {
  PidState next = state;
  const PidGains& g = state.gains;
  next.integral = std::clamp(state.integral + error * dt, -g.integral_limit, g.integral_limit);
  const double derivative = (error - state.prev_error) / dt;
  next.prev_error = error;
  const double out = g.kp * error + g.ki * next.integral + g.kd * derivative;
  return {out, next};
}

struct ControllerConfig {
  PidGains heading{0.9, 0.0, 0.1, 10.0};
  PidGains speed{0.5, 0.05, 0.0, 10.0};
  std::vector<std::size_t> aim_indices{2, 3};  // zero-based: waypoints 3 and 4
  double brake_speed_threshold = 0.4;          // m/s
  double max_target_speed = 8.0;               // m/s
  double waypoint_dt = 0.5;                    // s between planned waypoints
  double dt = 0.1;                             // control period
};

struct ControllerState {
  PidState heading;
  PidState speed;

  static ControllerState from(const ControllerConfig& cfg) { return {PidState{cfg.heading}, PidState{cfg.speed}}; }
};

struct ControlDiagnostics {
  double heading_error = 0.0;  // rad, positive when the aim point is to the right
  double desired_speed = 0.0;  // m/s
};

/// Mean spacing of consecutive waypoints divided by the waypoint period.
inline double desired_speed(const Trajectory& traj, const ControllerConfig& cfg) {
  double sum = 0.0;
  for (std::size_t k = 1; k < traj.size(); ++k) {
    sum += std::hypot(traj[k].x - traj[k - 1].x, traj[k].y - traj[k - 1].y);
  }
  const double v = sum / static_cast<double>(traj.size() - 1) / cfg.waypoint_dt;
  return std::min(v, cfg.max_target_speed);
}

inline double aim_heading_error(const Trajectory& traj, const ControllerConfig& cfg) {
  double ax = 0.0;
  double ay = 0.0;
  std::size_t n = 0;
  for (std::size_t i : cfg.aim_indices) {
    if (i >= traj.size()) continue;
    ax += traj[i].x;
    ay += traj[i].y;
    ++n;
  }
  if (n == 0) return 0.0;
  ax /= static_cast<double>(n);
  ay /= static_cast<double>(n);
  if (ax == 0.0 && ay == 0.0) return 0.0;
  return std::atan2(ax, ay);
}

struct ControlOutput {
  ControlCommand command;
  ControllerState state;
  ControlDiagnostics diagnostics;
};

/// Heading PID on the aim direction drives steer; speed PID on the planned
/// speed drives throttle (positive output) or brake (negative output).
/// Planned speeds under the brake threshold force a full stop.
inline ControlOutput waypoints_to_control(const Trajectory& traj, double ego_speed, const ControllerConfig& cfg,
                                          const ControllerState& state) {
  ControlOutput out;
  const double heading_error = aim_heading_error(traj, cfg);
  auto [steer, heading_state] = pid_step(state.heading, heading_error, cfg.dt);

  const double target = desired_speed(traj, cfg);
  auto [accel, speed_state] = pid_step(state.speed, target - ego_speed, cfg.dt);

  double throttle = accel > 0.0 ? accel : 0.0;
  double brake = accel < 0.0 ? -accel : 0.0;
  if (target < cfg.brake_speed_threshold) {
    throttle = 0.0;
    brake = 1.0;
  }
  out.command = ControlCommand::make(steer, throttle, brake);
  out.state = {heading_state, speed_state};
  out.diagnostics = {heading_error, target};
  return out;
}

}  // namespace loopdrive
