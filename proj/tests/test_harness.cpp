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

#include "loopdrive/harness.hpp"
#include "loopdrive/suite.hpp"

namespace loopdrive {
namespace {

/// Answers from a callback; used to script planner misbehaviour.
class ScriptedPlanner : public Planner {
 public:
  explicit ScriptedPlanner(std::function<std::string(const PlannerRequest&)> f) : f_(std::move(f)) {}
  PlannerResponse plan(const PlannerRequest& req) override { return {req.episode_id, req.tick, f_(req), 0.0}; }

 private:
  std::function<std::string(const PlannerRequest&)> f_;
};

EpisodeRun run_oracle(const Scenario& s, const HarnessConfig& cfg = {}) {
  OraclePlanner p(cfg.resolved().oracle);
  return run_episode(s, p, cfg);
}

TEST(Harness, OracleCompletesStraightRoute) {
  const auto run = run_oracle(suite::smoke_suite()[0]);
  EXPECT_EQ(run.result.termination, Termination::completed);
  EXPECT_EQ(run.result.route_completion, 100.0);
  EXPECT_TRUE(run.result.events.empty());
  EXPECT_EQ(run.trace.queries.size(), static_cast<std::size_t>((run.result.ticks - 1) / 5 + 1));
  EXPECT_EQ(run.trace.ticks.front().tick, 1);
  EXPECT_EQ(run.trace.ticks.back().tick, run.result.ticks);
}

TEST(Harness, QueriesOnCadence) {
  HarnessConfig cfg;
  cfg.planner_cadence = 3;
  const auto run = run_oracle(suite::smoke_suite()[1], cfg);
  for (const auto& q : run.trace.queries) EXPECT_EQ(q.tick % 3, 0);
}

TEST(Harness, RepeatedRunsAreByteIdentical) {
  for (const auto& s : suite::smoke_suite()) {
    const auto a = to_json(run_oracle(s).trace).dump();
    const auto b = to_json(run_oracle(s).trace).dump();
    EXPECT_EQ(a, b) << s.id;
  }
}

TEST(Harness, ParallelMatchesSequential) {
  const auto suite = suite::smoke_suite();
  const HarnessConfig cfg;
  const auto f = make_planner_factory("oracle", cfg.resolved().oracle);
  const auto a = run_benchmark(suite, f, cfg, true);
  const auto b = run_benchmark(suite, f, cfg, false);
  EXPECT_EQ(to_json(a.report).dump(), to_json(b.report).dump());
  EXPECT_EQ(render_table(a.report), render_table(b.report));
  for (std::size_t i = 0; i < a.traces.size(); ++i) EXPECT_EQ(to_json(a.traces[i]), to_json(b.traces[i]));
}

TEST(Harness, AttentionPrefixOnlyChangesPrompts) {
  const auto s = suite::smoke_suite()[8];
  HarnessConfig on, off;
  off.attention_prefix = false;
  const auto a = run_oracle(s, on).trace;
  const auto b = run_oracle(s, off).trace;
  ASSERT_EQ(a.queries.size(), b.queries.size());
  for (std::size_t i = 0; i < a.queries.size(); ++i) {
    EXPECT_EQ(a.queries[i].prompt.rfind(kAttentionPrefix, 0), 0u);
    EXPECT_NE(b.queries[i].prompt.rfind("Pay attention", 0), 0u);
    EXPECT_EQ(a.queries[i].prompt.substr(kAttentionPrefix.size() + 1), b.queries[i].prompt);
    EXPECT_EQ(a.queries[i].scene.dump(), b.queries[i].scene.dump());
  }
}

TEST(Harness, TraceJsonRoundTrip) {
  const auto t = run_oracle(suite::smoke_suite()[6]).trace;
  const auto j = to_json(t);
  EXPECT_EQ(j.at("schema"), "loopdrive.trace");
  EXPECT_EQ(to_json(trace_from_json(j)), j);
  EXPECT_EQ(to_json(trace_from_json(nlohmann::json::parse(j.dump()))).dump(), j.dump());
}

TEST(Replay, ReproducesWithoutPlanner) {
  for (const auto& s : suite::smoke_suite()) {
    const auto t = run_oracle(s).trace;
    const auto back = trace_from_json(nlohmann::json::parse(to_json(t).dump()));
    const auto r = replay(back);
    EXPECT_TRUE(r.identical) << s.id;
    EXPECT_FALSE(r.first_divergent_tick.has_value());
    EXPECT_EQ(to_json(r.result), to_json(t.result));
  }
}

TEST(Replay, SubstitutedResponseDiverges) {
  const auto t = run_oracle(suite::smoke_suite()[0]).trace;
  auto tr = t.transcript();
  tr[4].text = format_answer(Trajectory{});
  const auto r = replay(t, tr);
  EXPECT_FALSE(r.identical);
  ASSERT_TRUE(r.first_divergent_tick.has_value());
  EXPECT_EQ(*r.first_divergent_tick, tr[4].tick + 1);
}

TEST(Replay, FingerprintGuardsInputs) {
  auto t = run_oracle(suite::smoke_suite()[0]).trace;
  t.config["seed"] = 99;
  EXPECT_THROW(replay(t), FingerprintMismatch);
}

TEST(Fallback, ReuseThenBrake) {
  // Good plan at tick 0, garbage afterwards.
  HarnessConfig cfg;
  cfg.detector.block_time = 5.0;
  OraclePlanner oracle(cfg.resolved().oracle);
  ScriptedPlanner p([&](const PlannerRequest& r) { return r.tick == 0 ? oracle.plan(r).text : "no idea"; });
  const auto run = run_episode(suite::smoke_suite()[0], p, cfg);
  std::vector<PlanOutcome> outcomes;
  for (const auto& t : run.trace.ticks) {
    if ((t.tick - 1) % 5 == 0) outcomes.push_back(t.outcome);
  }
  ASSERT_GE(outcomes.size(), 6u);
  EXPECT_EQ(outcomes[0], PlanOutcome::ok);
  EXPECT_EQ(outcomes[1], PlanOutcome::reuse);
  EXPECT_EQ(outcomes[3], PlanOutcome::reuse);
  EXPECT_EQ(outcomes[4], PlanOutcome::brake);
  EXPECT_EQ(run.trace.ticks[5].error, "FewerThanFivePairs");
  EXPECT_EQ(run.result.termination, Termination::blocked);
  for (const auto& t : run.trace.ticks) {
    if (t.outcome == PlanOutcome::brake) {
      EXPECT_EQ(t.command, ControlCommand::emergency_brake());
    }
  }
}

TEST(Fallback, TimeoutRecorded) {
  struct Slow : Planner {
    PlannerResponse plan(const PlannerRequest& r) override { throw PlannerTimeout("tick " + std::to_string(r.tick)); }
  } p;
  HarnessConfig cfg;
  cfg.detector.block_time = 3.0;
  const auto run = run_episode(suite::smoke_suite()[0], p, cfg);
  EXPECT_TRUE(run.trace.queries[0].timeout);
  EXPECT_EQ(run.trace.ticks[0].error, "Timeout");
  EXPECT_EQ(run.result.termination, Termination::blocked);
  const auto r = replay(run.trace);
  EXPECT_TRUE(r.identical);
}

TEST(Termination, Deviation) {
  ScriptedPlanner p([](const PlannerRequest&) {
    return std::string("The next five passing waypoints are (3.00, 2.00), (6.00, 4.00), (9.00, 6.00), (12.00, 8.00), "
                       "(15.00, 10.00).");
  });
  const auto run = run_episode(suite::smoke_suite()[0], p, HarnessConfig{});
  EXPECT_EQ(run.result.termination, Termination::deviated);
  EXPECT_EQ(run.result.count(InfractionKind::route_deviation), 1u);
  EXPECT_LT(run.result.route_completion, 100.0);
}

TEST(Termination, Timeout) {
  HarnessConfig cfg;
  cfg.timeout_s = 4.0;
  const auto run = run_oracle(suite::smoke_suite()[0], cfg);
  EXPECT_EQ(run.result.termination, Termination::timeout);
  EXPECT_EQ(run.result.ticks, 40);
  EXPECT_GT(run.result.route_completion, 0.0);
  EXPECT_LT(run.result.route_completion, 100.0);
}

TEST(Benchmark, DisconnectAbortsOnlyThatEpisode) {
  const auto suite = suite::smoke_suite();
  const HarnessConfig cfg;
  const auto oracle = make_planner_factory("oracle", cfg.resolved().oracle);
  std::vector<Scenario> two{suite[0], suite[1]};
  const auto run = run_benchmark(
      two,
      [&]() -> std::unique_ptr<Planner> {
        static thread_local int n = 0;
        if (n++ == 0) return std::make_unique<TranscriptPlanner>(std::vector<TranscriptEntry>{});
        return oracle();
      },
      cfg, false);
  ASSERT_EQ(run.report.rows.size(), 2u);
  EXPECT_EQ(run.report.rows[0].termination, Termination::aborted);
  EXPECT_FALSE(run.report.rows[0].error.empty());
  EXPECT_EQ(run.report.rows[1].termination, Termination::completed);
}

TEST(Targets, FixedModeHoldsUntilPassed) {
  const RouteSpec r("s", {{0, 0}, {200, 0}}, 6.0, 50.0);
  HarnessConfig cfg;
  cfg.target_mode = TargetMode::fixed;
  EgoState ego;
  ego.pose = {10, 0, 0};
  EXPECT_DOUBLE_EQ(planner_target(r, ego, 10, cfg).y, 40.0);
  ego.pose = {46, 0, 0};
  EXPECT_DOUBLE_EQ(planner_target(r, ego, 46, cfg).y, 54.0);
  cfg.target_mode = TargetMode::refreshed;
  EXPECT_DOUBLE_EQ(planner_target(r, ego, 46, cfg).y, 20.0);
}

TEST(Scene, WindowPadsOldestFirst) {
  const auto run = run_oracle(suite::smoke_suite()[9]);
  const auto& first = run.trace.queries[0].scene.at("frames");
  ASSERT_EQ(first.size(), 5u);
  for (const auto& f : first) EXPECT_EQ(f.at("tick"), 0);
  const auto& later = run.trace.queries[2].scene.at("frames");
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(later[k].at("tick"), 6 + static_cast<int>(k));
}

TEST(Faults, EachTriggersItsInfraction) {
  const HarnessConfig cfg;
  const auto check = [&](const std::string& name, InfractionKind kind, double is) {
    const auto s = suite::fault_scenario(name);
    auto p = make_planner_factory("faults:" + name, cfg.resolved().oracle)();
    const auto run = run_episode(s, *p, cfg);
    ASSERT_EQ(run.result.events.size(), 1u) << name;
    EXPECT_EQ(run.result.events[0].kind, kind) << name;
    EXPECT_NEAR(run.result.infraction_score, is, 1e-9);
    const auto clean = run_oracle(s, cfg);
    EXPECT_TRUE(clean.result.events.empty()) << name;
    EXPECT_EQ(clean.result.termination, Termination::completed);
  };
  check("red-light-runner", InfractionKind::red_light, 0.70);
  check("collider", InfractionKind::collision_vehicle, 0.60);
  check("stopper", InfractionKind::agent_blocked, 1.0);
  check("mute", InfractionKind::agent_blocked, 1.0);
}

}  // namespace
}  // namespace loopdrive
