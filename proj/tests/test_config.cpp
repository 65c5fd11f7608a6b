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

#include <filesystem>
#include <fstream>

#include "loopdrive/config.hpp"

namespace loopdrive {
namespace {

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, DefaultsRoundTrip) {
  const HarnessConfig c;
  const auto j = to_json(c);
  EXPECT_EQ(to_json(config_from_json(j)), j);
  EXPECT_EQ(j.at("planner_cadence"), 5);
  EXPECT_EQ(j.at("fallback").at("reuse_last_plan_max"), 3);
  EXPECT_EQ(j.at("detector").at("t_block"), 90.0);
  EXPECT_EQ(j.at("penalties").at("red_light"), 0.7);
  EXPECT_EQ(j.at("lookahead"), 20.0);
}

TEST(Config, PartialDocumentMergesOverDefaults) {
  const auto c = config_from_json(nlohmann::json::parse(R"({"dt": 0.05, "detector": {"t_block": 30}})"));
  EXPECT_EQ(c.dt, 0.05);
  EXPECT_EQ(c.detector.block_time, 30.0);
  EXPECT_EQ(c.detector.deviation_distance, 8.0);
  EXPECT_EQ(c.planner_cadence, 5);
}

TEST(Config, UnknownKeyNamed) {
  EXPECT_NE(message_of([] { config_from_json(nlohmann::json::parse(R"({"detector": {"t_blok": 3}})")); })
                .find("detector.t_blok"),
            std::string::npos);
  EXPECT_NE(message_of([] { config_from_json(nlohmann::json::parse(R"({"planner": "x"})")); }).find("'planner'"),
            std::string::npos);
}

TEST(Config, BadValuesRejected) {
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"dt": 0})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"dt": "fast"})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"penalties": {"red_light": 1.5}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"target_mode": "random"})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"schema_version": 9})")), ConfigError);
}

TEST(Config, Overrides) {
  const auto c = apply_overrides(HarnessConfig{}, {"attention_prefix=false", "detector.t_block=12", "timeout_s=45",
                                                   "prompt_wording=point", "penalties.red_light=0.5"});
  EXPECT_FALSE(c.attention_prefix);
  EXPECT_EQ(c.detector.block_time, 12.0);
  EXPECT_EQ(c.timeout_for(1000.0), 45.0);
  EXPECT_EQ(c.prompt_style.body, PromptWording::point);
  EXPECT_EQ(c.penalties.at(InfractionKind::red_light), 0.5);
  EXPECT_NE(message_of([] { apply_overrides(HarnessConfig{}, {"detector.nope=1"}); }).find("detector.nope"),
            std::string::npos);
  EXPECT_THROW(apply_overrides(HarnessConfig{}, {"dt"}), ConfigError);
}

TEST(Config, TimeoutScalesWithLength) {
  const HarnessConfig c;
  EXPECT_EQ(c.timeout_for(250.0), 300.0);
}

TEST(Config, LoadNamesPath) {
  const auto dir = std::filesystem::temp_directory_path() / "loopdrive_config_test";
  std::filesystem::create_directories(dir);
  const auto bad = dir / "bad.json";
  std::ofstream(bad) << "{ not json";
  EXPECT_NE(message_of([&] { load_config(bad); }).find(bad.string()), std::string::npos);
  EXPECT_NE(message_of([&] { load_config(dir / "missing.json"); }).find("missing.json"), std::string::npos);
  const auto good = dir / "good.json";
  std::ofstream(good) << R"({"seed": 17})";
  EXPECT_EQ(load_config(good).seed, 17u);
}

TEST(Config, ResolvedSharesTiming) {
  HarnessConfig c;
  c.dt = 0.05;
  c.waypoint_dt = 0.4;
  c.vehicle.half_width = 1.2;
  const auto r = c.resolved();
  EXPECT_EQ(r.controller.dt, 0.05);
  EXPECT_EQ(r.controller.waypoint_dt, 0.4);
  EXPECT_EQ(r.oracle.waypoint_dt, 0.4);
  EXPECT_EQ(r.oracle.ego_half_width, 1.2);
}

}  // namespace
}  // namespace loopdrive
