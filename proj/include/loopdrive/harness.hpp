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
#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "loopdrive/config.hpp"
#include "loopdrive/infraction.hpp"
#include "loopdrive/pid.hpp"
#include "loopdrive/planner.hpp"
#include "loopdrive/protocol.hpp"
#include "loopdrive/route.hpp"
#include "loopdrive/scenario.hpp"
#include "loopdrive/scoring.hpp"
#include "loopdrive/sim.hpp"

namespace loopdrive {

inline constexpr int kTraceSchemaVersion = 1;

class PlannerUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FingerprintMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// What happened to the plan on a tick. `hold` means no query on this tick.
enum class PlanOutcome { hold, ok, reuse, brake };

inline std::string_view to_string(PlanOutcome o) {
  switch (o) {
    case PlanOutcome::hold: return "hold";
    case PlanOutcome::ok: return "ok";
    case PlanOutcome::reuse: return "reuse";
    case PlanOutcome::brake: return "brake";
  }
  return "hold";
}

struct TickRecord {
  std::int64_t tick = 0;  // tick of the state after the step
  std::uint64_t hash = 0;
  Pose2D pose;
  double speed = 0.0;
  double s = 0.0;
  double lateral_offset = 0.0;
  ControlCommand command;
  std::int64_t plan_id = -1;  // query index whose plan drove this tick; -1 for emergency brake
  PlanOutcome outcome = PlanOutcome::hold;
  std::string error;  // parse or transport error of this tick's query
  std::vector<InfractionEvent> events;
};

struct QueryRecord {
  std::int64_t tick = 0;
  std::string prompt;
  nlohmann::json scene;
  std::string response;
  bool timeout = false;
};

struct EpisodeTrace {
  std::string episode_id;
  std::string fingerprint;
  nlohmann::json config;
  nlohmann::json scenario;
  std::vector<TickRecord> ticks;
  std::vector<QueryRecord> queries;
  EpisodeResult result;

  std::vector<TranscriptEntry> transcript() const {
    std::vector<TranscriptEntry> t;
    for (const auto& q : queries) t.push_back({q.tick, q.response, q.timeout});
    return t;
  }
};

inline std::string config_fingerprint(const nlohmann::json& config, const nlohmann::json& scenario) {
  const nlohmann::json doc{{"trace_schema", kTraceSchemaVersion}, {"config", config}, {"scenario", scenario}};
  return hex64(detail::fnv1a(doc.dump()));
}

inline nlohmann::json to_json(const EpisodeTrace& t) {
  nlohmann::json ticks = nlohmann::json::array();
  for (const auto& r : t.ticks) {
    nlohmann::json ev = nlohmann::json::array();
    for (const auto& e : r.events) ev.push_back(to_json(e));
    ticks.push_back({{"tick", r.tick},
                     {"hash", hex64(r.hash)},
                     {"pose", {r.pose.x, r.pose.y, r.pose.yaw}},
                     {"speed", r.speed},
                     {"s", r.s},
                     {"lateral_offset", r.lateral_offset},
                     {"command", {r.command.steer, r.command.throttle, r.command.brake}},
                     {"plan_id", r.plan_id},
                     {"outcome", std::string(to_string(r.outcome))},
                     {"error", r.error},
                     {"events", ev}});
  }
  nlohmann::json queries = nlohmann::json::array();
  for (const auto& q : t.queries) {
    queries.push_back(
        {{"tick", q.tick}, {"prompt", q.prompt}, {"scene", q.scene}, {"response", q.response}, {"timeout", q.timeout}});
  }
  return {{"schema", "loopdrive.trace"},
          {"version", kTraceSchemaVersion},
          {"episode_id", t.episode_id},
          {"fingerprint", t.fingerprint},
          {"config", t.config},
          {"scenario", t.scenario},
          {"ticks", ticks},
          {"queries", queries},
          {"result", to_json(t.result)}};
}

inline EpisodeTrace trace_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != "loopdrive.trace") throw FingerprintMismatch("not a loopdrive.trace document");
  if (j.value("version", 0) != kTraceSchemaVersion) {
    throw FingerprintMismatch("trace schema version " + std::to_string(j.value("version", 0)) + " != " +
                              std::to_string(kTraceSchemaVersion));
  }
  EpisodeTrace t;
  t.episode_id = j.at("episode_id").get<std::string>();
  t.fingerprint = j.at("fingerprint").get<std::string>();
  t.config = j.at("config");
  t.scenario = j.at("scenario");
  for (const auto& r : j.at("ticks")) {
    TickRecord tr;
    tr.tick = r.at("tick").get<std::int64_t>();
    tr.hash = std::stoull(r.at("hash").get<std::string>(), nullptr, 16);
    const auto& p = r.at("pose");
    tr.pose = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
    tr.speed = r.at("speed").get<double>();
    tr.s = r.at("s").get<double>();
    tr.lateral_offset = r.at("lateral_offset").get<double>();
    const auto& c = r.at("command");
    tr.command = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
    tr.plan_id = r.at("plan_id").get<std::int64_t>();
    const auto o = r.at("outcome").get<std::string>();
    tr.outcome = o == "ok" ? PlanOutcome::ok : o == "reuse" ? PlanOutcome::reuse : o == "brake" ? PlanOutcome::brake : PlanOutcome::hold;
    tr.error = r.at("error").get<std::string>();
    for (const auto& e : r.at("events")) tr.events.push_back(event_from_json(e));
    t.ticks.push_back(std::move(tr));
  }
  for (const auto& q : j.at("queries")) {
    t.queries.push_back({q.at("tick").get<std::int64_t>(), q.at("prompt").get<std::string>(), q.at("scene"),
                         q.at("response").get<std::string>(), q.at("timeout").get<bool>()});
  }
  t.result = result_from_json(j.at("result"));
  return t;
}

namespace detail {

struct Snapshot {
  std::int64_t tick = 0;
  std::vector<NpcAgent> npcs;
  std::vector<LightPhase> phases;
};

inline Snapshot snapshot(const WorldState& w) {
  Snapshot s{w.tick, w.npcs, {}};
  for (const auto& l : w.lights) s.phases.push_back(light_phase(l, w.tick, w.dt));
  return s;
}

inline std::vector<Vec2> route_ahead(const RouteSpec& route, double s, double horizon) {
  const double end = std::min(s + horizon, route.length());
  std::vector<Vec2> pts{route.point_at(s)};
  const auto& cum = route.arc_lengths();
  for (std::size_t i = 0; i < cum.size(); ++i) {
    if (cum[i] > s && cum[i] < end) pts.push_back(route.points()[i]);
  }
  pts.push_back(route.point_at(end));
  // Past the route end the centreline continues straight so a plan can
  // carry the ego across the finish.
  if (s + horizon > route.length()) pts.push_back(route.point_at(route.length() + 10.0));
  std::vector<Vec2> out;
  for (const auto& p : pts) {
    if (out.empty() || norm(p - out.back()) > 1e-9) out.push_back(p);
  }
  return out;
}

}  // namespace detail

/// Scene record for the current tick from a window of world snapshots.
inline SceneRecord build_scene(const WorldState& world, const std::deque<detail::Snapshot>& window,
                               const RouteSpec& route, double s, const HarnessConfig& cfg) {
  SceneRecord sc;
  sc.ego_speed = world.ego.speed;
  sc.speed_limit = route.speed_limit();
  sc.dt = world.dt;
  sc.route_remaining = std::max(0.0, route.length() - s);
  const Pose2D& ego = world.ego.pose;
  for (const auto& p : detail::route_ahead(route, s, cfg.route_horizon)) sc.route_ahead.push_back(world_to_ego(ego, p));
  for (std::size_t k = 0; k < kFrameWindow; ++k) {
    // Oldest first; repeat the earliest snapshot until the window fills.
    const std::size_t missing = kFrameWindow - std::min(window.size(), kFrameWindow);
    const auto& snap = window[k < missing ? 0 : k - missing];
    SceneFrame f;
    f.tick = snap.tick;
    for (const auto& n : snap.npcs) {
      const Vec2 p = world_to_ego(ego, n.pose.position());
      f.npcs.push_back({n.id, n.kind, p.x, p.y, normalize_angle(n.pose.yaw - ego.yaw), n.half_length, n.half_width});
    }
    for (std::size_t i = 0; i < world.lights.size(); ++i) {
      const auto& l = world.lights[i];
      f.lights.push_back({l.id, snap.phases[i], world_to_ego(ego, l.stop_start), world_to_ego(ego, l.stop_end)});
    }
    sc.frames.push_back(std::move(f));
  }
  return sc;
}

/// Ego-frame target handed to the planner at arc length s.
inline TargetWaypoint planner_target(const RouteSpec& route, const EgoState& ego, double s, const HarnessConfig& cfg) {
  if (cfg.target_mode == TargetMode::refreshed) return next_target(route, ego, s, cfg.lookahead);
  const double spacing = route.target_spacing();
  const double arc = std::min(route.length(), std::ceil((s + 5.0) / spacing) * spacing);
  return to_target(world_to_ego(ego.pose, route.point_at(arc)));
}

struct EpisodeRun {
  EpisodeResult result;
  EpisodeTrace trace;
};

/// Runs one closed-loop episode.
///
/// Each tick: every planner_cadence ticks the planner receives a prompt and
/// scene record and its answer is parsed. A failed parse (or a planner
/// timeout) reuses the last valid plan for up to reuse_last_plan_max
/// consecutive failures, then the ego brakes fully until a valid plan
/// arrives. Plans are held in the world frame between queries and re-read in
/// the current ego frame by the PID stage. After the step the infraction
/// detector runs and the episode ends on completion, deviation, blocking or
/// timeout, in that priority.
///
/// Throws ScenarioInvalid for a bad scenario and PlannerUnavailable when the
/// planner disconnects.
inline EpisodeRun run_episode(const Scenario& scenario, Planner& planner, const HarnessConfig& config) {
  validate(scenario);
  config.validate();
  const HarnessConfig cfg = config.resolved();
  const RouteSpec& route = scenario.route;

  EpisodeRun run;
  EpisodeTrace& trace = run.trace;
  trace.episode_id = scenario.id;
  trace.config = to_json(config);
  trace.scenario = to_json(scenario);
  trace.fingerprint = config_fingerprint(trace.config, trace.scenario);

  WorldState world = scenario.initial_world(cfg.vehicle, cfg.dt, cfg.seed);
  RouteTracker tracker(route);
  RouteProjection proj = tracker.reset(world.ego.pose);
  InfractionDetector detector(cfg.detector);
  ControllerState ctrl = ControllerState::from(cfg.controller);

  std::deque<detail::Snapshot> window{detail::snapshot(world)};
  std::array<Vec2, kTrajectoryLength> plan{};  // world frame
  bool has_plan = false;
  std::int64_t plan_id = -1;
  int failures = 0;
  std::vector<InfractionEvent> events;
  const auto timeout_ticks = static_cast<std::int64_t>(std::ceil(cfg.timeout_for(route.length()) / cfg.dt - 1e-9));
  Termination term = Termination::timeout;

  for (;;) {
    TickRecord rec;
    if (world.tick % cfg.planner_cadence == 0) {
      PlannerRequest req;
      req.episode_id = scenario.id;
      req.tick = world.tick;
      req.prompt = format_prompt(planner_target(route, world.ego, proj.s, cfg), cfg.attention_prefix, cfg.prompt_style);
      req.scene = build_scene(world, window, route, proj.s, cfg);
      req.deadline_ms = cfg.deadline_ms;

      QueryRecord q{req.tick, req.prompt, to_json(req.scene), "", false};
      std::optional<ParseResult> parsed;
      try {
        const PlannerResponse resp = planner.plan(req);
        q.response = resp.text;
        parsed = parse_answer(resp.text);
      } catch (const PlannerTimeout&) {
        q.timeout = true;
      } catch (const PlannerDisconnected& e) {
        throw PlannerUnavailable("episode '" + scenario.id + "': " + e.what());
      }
      const auto query_index = static_cast<std::int64_t>(trace.queries.size());
      trace.queries.push_back(std::move(q));

      if (parsed && parsed->ok()) {
        std::array<Vec2, kTrajectoryLength> w;
        for (std::size_t k = 0; k < kTrajectoryLength; ++k) {
          w[k] = ego_to_world(world.ego.pose, {parsed->value()[k].x, parsed->value()[k].y});
        }
        plan = w;
        has_plan = true;
        plan_id = query_index;
        failures = 0;
        rec.outcome = PlanOutcome::ok;
      } else {
        rec.error = parsed ? std::string(to_string(parsed->error())) : "Timeout";
        ++failures;
        if (has_plan && failures <= cfg.reuse_last_plan_max) {
          rec.outcome = PlanOutcome::reuse;
        } else {
          has_plan = false;
          plan_id = -1;
          rec.outcome = PlanOutcome::brake;
        }
      }
    }

    ControlCommand cmd = ControlCommand::emergency_brake();
    if (has_plan) {
      Trajectory local;
      for (std::size_t k = 0; k < kTrajectoryLength; ++k) local[k] = to_target(world_to_ego(world.ego.pose, plan[k]));
      const auto out = waypoints_to_control(local, world.ego.speed, cfg.controller, ctrl);
      cmd = out.command;
      ctrl = out.state;
    }

    WorldState next = step_world(world, cmd);
    proj = tracker.update(next.ego.pose);
    auto fired = detector.detect(world, next, proj);
    world = std::move(next);
    window.push_back(detail::snapshot(world));
    if (window.size() > kFrameWindow) window.pop_front();

    rec.tick = world.tick;
    rec.hash = world_hash(world);
    rec.pose = world.ego.pose;
    rec.speed = world.ego.speed;
    rec.s = proj.s;
    rec.lateral_offset = proj.lateral_offset;
    rec.command = cmd;
    rec.plan_id = plan_id;
    rec.events = fired;
    events.insert(events.end(), fired.begin(), fired.end());
    trace.ticks.push_back(std::move(rec));

    const auto fired_kind = [&](InfractionKind k) {
      return std::any_of(fired.begin(), fired.end(), [k](const auto& e) { return e.kind == k; });
    };
    if (proj.s >= route.length()) {
      term = Termination::completed;
      break;
    }
    if (fired_kind(InfractionKind::route_deviation)) {
      term = Termination::deviated;
      break;
    }
    if (fired_kind(InfractionKind::agent_blocked)) {
      term = Termination::blocked;
      break;
    }
    if (world.tick >= timeout_ticks) {
      term = Termination::timeout;
      break;
    }
  }

  run.result = make_result(scenario.id, route_completion(route, proj.s), std::move(events), cfg.penalties, world.tick, term);
  trace.result = run.result;
  return run;
}

struct BenchmarkRun {
  BenchmarkReport report;
  std::vector<EpisodeTrace> traces;  // same order as report.rows
};

/// Runs every scenario with a fresh planner from `factory`. Episodes run on
/// worker threads when `parallel` is set; rows are ordered by route id.
/// A planner failure aborts only its own episode.
inline BenchmarkRun run_benchmark(const std::vector<Scenario>& scenarios, const PlannerFactory& factory,
                                  const HarnessConfig& cfg, bool parallel = true) {
  if (scenarios.empty()) throw EmptyBenchmark();
  std::vector<EpisodeRun> runs(scenarios.size());
  const auto one = [&](std::size_t i) {
    try {
      auto planner = factory();
      runs[i] = run_episode(scenarios[i], *planner, cfg);
    } catch (const PlannerUnavailable& e) {
      EpisodeRun r;
      r.result.route_id = scenarios[i].id;
      r.result.termination = Termination::aborted;
      r.result.error = e.what();
      r.trace.episode_id = scenarios[i].id;
      r.trace.result = r.result;
      runs[i] = std::move(r);
    }
  };
  const unsigned workers = parallel ? std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                                      static_cast<unsigned>(scenarios.size())))
                                    : 1u;
  if (workers <= 1) {
    for (std::size_t i = 0; i < scenarios.size(); ++i) one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < scenarios.size(); i = next++) one(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::stable_sort(runs.begin(), runs.end(),
                   [](const EpisodeRun& a, const EpisodeRun& b) { return a.result.route_id < b.result.route_id; });
  BenchmarkRun out;
  std::vector<EpisodeResult> results;
  for (auto& r : runs) {
    results.push_back(r.result);
    out.traces.push_back(std::move(r.trace));
  }
  out.report = aggregate(std::move(results), cfg.normalize_per);
  return out;
}

struct ReplayOutcome {
  EpisodeResult result;
  bool identical = false;
  std::optional<std::int64_t> first_divergent_tick;
};

/// Re-runs a recorded episode from its embedded config and scenario, feeding
/// the planner responses back from `transcript`. Throws FingerprintMismatch
/// when the embedded inputs no longer hash to the recorded fingerprint.
inline ReplayOutcome replay(const EpisodeTrace& trace, const std::vector<TranscriptEntry>& transcript) {
  if (config_fingerprint(trace.config, trace.scenario) != trace.fingerprint) {
    throw FingerprintMismatch("trace '" + trace.episode_id + "': fingerprint does not match its config and scenario");
  }
  const HarnessConfig cfg = config_from_json(trace.config);
  const Scenario scenario = scenario_from_json(trace.scenario);
  TranscriptPlanner planner(transcript);
  ReplayOutcome out;
  EpisodeRun run;
  try {
    run = run_episode(scenario, planner, cfg);
  } catch (const PlannerUnavailable&) {
    out.result = trace.result;
    out.first_divergent_tick = trace.ticks.empty() ? 0 : trace.ticks.front().tick;
    return out;
  }
  out.result = run.result;
  const std::size_t n = std::min(run.trace.ticks.size(), trace.ticks.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (run.trace.ticks[i].hash != trace.ticks[i].hash) {
      out.first_divergent_tick = trace.ticks[i].tick;
      break;
    }
  }
  if (!out.first_divergent_tick && run.trace.ticks.size() != trace.ticks.size()) {
    out.first_divergent_tick = n < trace.ticks.size() ? trace.ticks[n].tick : run.trace.ticks[n].tick;
  }
  out.identical = !out.first_divergent_tick && to_json(run.trace) == to_json(trace);
  return out;
}

inline ReplayOutcome replay(const EpisodeTrace& trace) { return replay(trace, trace.transcript()); }

}  // namespace loopdrive
