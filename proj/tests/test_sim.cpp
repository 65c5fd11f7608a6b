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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "loopdrive/sim.hpp"
#include "oracles.hpp"

namespace loopdrive {
namespace {

WorldState coasting_world(double speed) {
  WorldState w;
  w.vehicle.drag = 0.0;
  w.ego.speed = speed;
  w.ego.wheelbase = w.vehicle.wheelbase;
  return w;
}

TEST(ControlCommand, ClampsAndBrakeWins) {
  const auto c = ControlCommand::make(2.0, 1.5, -1.0);
  EXPECT_EQ(c.steer, 1.0);
  EXPECT_EQ(c.throttle, 1.0);
  EXPECT_EQ(c.brake, 0.0);
  const auto d = ControlCommand::make(-3.0, 0.7, 0.2);
  EXPECT_EQ(d.steer, -1.0);
  EXPECT_EQ(d.throttle, 0.0);
  EXPECT_EQ(d.brake, 0.2);
  const auto e = ControlCommand::make(NAN, NAN, NAN);
  EXPECT_EQ(e, ControlCommand::emergency_brake());
}

TEST(Kinematics, StraightLineAtConstantSpeed) {
  WorldState w = coasting_world(5.0);
  for (int i = 0; i < 100; ++i) w = step_world(w, ControlCommand::make(0, 0, 0));
  EXPECT_NEAR(w.ego.pose.x, 50.0, 1e-9);
  EXPECT_EQ(w.ego.pose.y, 0.0);
  EXPECT_EQ(w.tick, 100);
}

TEST(Kinematics, SpeedNeverNegative) {
  WorldState w = coasting_world(0.5);
  for (int i = 0; i < 10; ++i) w = step_world(w, ControlCommand::make(0, 0, 1));
  EXPECT_EQ(w.ego.speed, 0.0);
  const double x = w.ego.pose.x;
  w = step_world(w, ControlCommand::make(0, 0, 1));
  EXPECT_EQ(w.ego.pose.x, x);
}

TEST(Kinematics, AccelerationLaw) {
  WorldState w;
  w.ego.speed = 4.0;
  const WorldState n = step_world(w, ControlCommand::make(0, 0.5, 0));
  const auto& v = w.vehicle;
  EXPECT_NEAR(n.ego.speed, 4.0 + (v.max_accel * 0.5 - v.drag * 4.0) * w.dt, 1e-12);
}

TEST(Kinematics, PositiveSteerTurnsRight) {
  WorldState w = coasting_world(5.0);
  for (int i = 0; i < 20; ++i) w = step_world(w, ControlCommand::make(0.5, 0, 0));
  EXPECT_LT(w.ego.pose.yaw, 0.0);
  EXPECT_LT(w.ego.pose.y, 0.0);  // heading +x, so right is -y
}

TEST(Kinematics, SteerMirrorSymmetry) {
  WorldState a = coasting_world(6.0), b = coasting_world(6.0);
  for (int i = 0; i < 200; ++i) {
    a = step_world(a, ControlCommand::make(0.37, 0, 0));
    b = step_world(b, ControlCommand::make(-0.37, 0, 0));
    ASSERT_EQ(a.ego.pose.x, b.ego.pose.x);
    ASSERT_EQ(a.ego.pose.y, -b.ego.pose.y);
    ASSERT_EQ(a.ego.pose.yaw, -b.ego.pose.yaw);
  }
}

class TurningRadius : public ::testing::TestWithParam<double> {};

TEST_P(TurningRadius, MatchesBicycleGeometry) {
  const double steer = GetParam();
  WorldState w = coasting_world(4.0);
  const double wheel = w.vehicle.max_wheel_angle * std::abs(steer);
  const double expected = w.vehicle.wheelbase / std::tan(wheel);
  std::vector<Vec2> pts{w.ego.pose.position()};
  double turned = 0.0;
  double prev_yaw = w.ego.pose.yaw;
  while (turned < 2 * std::numbers::pi) {
    w = step_world(w, ControlCommand::make(steer, 0, 0));
    turned += std::abs(normalize_angle(w.ego.pose.yaw - prev_yaw));
    prev_yaw = w.ego.pose.yaw;
    pts.push_back(w.ego.pose.position());
  }
  const double r = oracle::fit_circle_radius(pts);
  EXPECT_NEAR(r / expected, 1.0, 0.01) << "fitted " << r << " expected " << expected;
}

INSTANTIATE_TEST_SUITE_P(Steers, TurningRadius, ::testing::Values(-1.0, -0.5, -0.2, 0.2, 0.5, 0.8, 1.0));

TEST(PoseScript, InterpolatesAndHolds) {
  PoseScript s{{{1.0, {0, 0, 0}}, {3.0, {10, 20, 0}}}};
  EXPECT_EQ(s.at(0.0).x, 0.0);
  EXPECT_DOUBLE_EQ(s.at(2.0).x, 5.0);
  EXPECT_DOUBLE_EQ(s.at(2.0).y, 10.0);
  EXPECT_EQ(s.at(99.0).y, 20.0);
}

TEST(PoseScript, YawTakesShortWay) {
  PoseScript s{{{0.0, {0, 0, 3.0}}, {1.0, {0, 0, -3.0}}}};
  EXPECT_NEAR(std::abs(s.at(0.5).yaw), std::numbers::pi, 1e-9);
}

TEST(Lights, PhaseSchedule) {
  TrafficLight l;
  l.schedule = {{LightPhase::green, 2.0}, {LightPhase::yellow, 0.5}, {LightPhase::red, 1.5}};
  EXPECT_EQ(light_phase(l, 0, 0.1), LightPhase::green);
  EXPECT_EQ(light_phase(l, 19, 0.1), LightPhase::green);
  EXPECT_EQ(light_phase(l, 20, 0.1), LightPhase::yellow);
  EXPECT_EQ(light_phase(l, 25, 0.1), LightPhase::red);
  EXPECT_EQ(light_phase(l, 39, 0.1), LightPhase::red);
  EXPECT_EQ(light_phase(l, 40, 0.1), LightPhase::green);  // wraps
  l.offset = 2.0;
  EXPECT_EQ(light_phase(l, 0, 0.1), LightPhase::yellow);
}

TEST(Lights, PhaseIsPeriodic) {
  TrafficLight l;
  l.schedule = {{LightPhase::red, 1.3}, {LightPhase::green, 2.1}, {LightPhase::yellow, 0.6}};
  l.offset = 0.7;
  const std::int64_t period = 40;  // 4.0 s at 0.1 s
  for (std::int64_t t = 0; t < 1000; ++t) ASSERT_EQ(light_phase(l, t, 0.1), light_phase(l, t + period, 0.1));
}

TEST(Lights, EmptyScheduleIsGreen) { EXPECT_EQ(light_phase(TrafficLight{}, 7, 0.1), LightPhase::green); }

TEST(Collisions, ReportsOverlappingNpcs) {
  WorldState w;
  NpcAgent a;
  a.id = "a";
  a.pose = {3, 0, 0};
  NpcAgent b;
  b.id = "b";
  b.kind = NpcKind::pedestrian;
  b.pose = {0, 30, 0};
  w.npcs = {a, b};
  const auto c = check_collisions(w);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].npc_id, "a");
}

TEST(Npcs, FollowScriptEveryTick) {
  WorldState w;
  NpcAgent n;
  n.id = "n";
  n.script.keys = {{0.0, {0, 10, 0}}, {1.0, {10, 10, 0}}};
  w.npcs = {n};
  w = step_world(w, ControlCommand{});
  EXPECT_NEAR(w.npcs[0].pose.x, 1.0, 1e-12);
}

TEST(WorldHash, SensitiveToEveryBit) {
  WorldState w;
  w.ego.pose = {1, 2, 0.3};
  const auto h = world_hash(w);
  WorldState v = w;
  v.ego.pose.x = std::nextafter(v.ego.pose.x, 10.0);
  EXPECT_NE(world_hash(v), h);
  EXPECT_EQ(world_hash(w), h);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

}  // namespace
}  // namespace loopdrive
