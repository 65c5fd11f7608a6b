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

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "loopdrive/harness.hpp"
#include "loopdrive/protocol.hpp"
#include "loopdrive/route.hpp"
#include "loopdrive/scenario.hpp"

namespace loopdrive::datagen {

/// k indices on the linear grid j*(L-1)/(k-1), rounded half up. Shorter
/// sequences are padded by repeating the last index.
inline std::vector<std::size_t> sample_frames(std::size_t length, std::size_t k = 5) {
  if (length == 0) throw std::invalid_argument("sample_frames needs a non-empty sequence");
  std::vector<std::size_t> out;
  if (k == 0) return out;
  if (k == 1) return {0};
  if (length < k) {
    for (std::size_t i = 0; i < length; ++i) out.push_back(i);
    while (out.size() < k) out.push_back(length - 1);
    return out;
  }
  const std::size_t span = length - 1;
  const std::size_t steps = k - 1;
  for (std::size_t j = 0; j < k; ++j) out.push_back((2 * j * span + steps) / (2 * steps));
  return out;
}

enum class Task { trajectory, risk, suggestion, action, object, attention, reasoning, description };

inline std::string_view to_string(Task t) {
  switch (t) {
    case Task::trajectory: return "trajectory";
    case Task::risk: return "risk";
    case Task::suggestion: return "suggestion";
    case Task::action: return "action";
    case Task::object: return "object";
    case Task::attention: return "attention";
    case Task::reasoning: return "reasoning";
    case Task::description: return "description";
  }
  return "trajectory";
}

inline Task task_from_string(std::string_view s) {
  for (auto t : {Task::trajectory, Task::risk, Task::suggestion, Task::action, Task::object, Task::attention,
                 Task::reasoning, Task::description}) {
    if (to_string(t) == s) return t;
  }
  throw std::invalid_argument("unknown task '" + std::string(s) + "'");
}

struct QAPair {
  std::vector<std::string> frames;  // exactly five frame references
  std::string question;
  std::string answer;
  Task task = Task::trajectory;
  std::string source;
  friend bool operator==(const QAPair&, const QAPair&) = default;
};

inline nlohmann::json to_json(const QAPair& q) {
  return {{"frames", q.frames},
          {"question", q.question},
          {"answer", q.answer},
          {"task", std::string(to_string(q.task))},
          {"source", q.source}};
}

inline QAPair qa_from_json(const nlohmann::json& j) {
  return {j.at("frames").get<std::vector<std::string>>(), j.at("question").get<std::string>(),
          j.at("answer").get<std::string>(), task_from_string(j.at("task").get<std::string>()),
          j.at("source").get<std::string>()};
}

// ---------------------------------------------------------------------------
// Trajectory pairs from autopilot runs.

struct AutopilotSample {
  std::int64_t tick = 0;
  EgoState ego;
  double s = 0.0;
};

struct AutopilotTrace {
  std::string route_id;
  double dt = 0.1;
  std::vector<AutopilotSample> samples;  // one per tick, starting at tick 0
};

/// Samples of a recorded episode, including the spawn state at tick 0.
inline AutopilotTrace autopilot_trace(const Scenario& scenario, const EpisodeTrace& trace, const HarnessConfig& cfg) {
  AutopilotTrace out{scenario.id, cfg.dt, {}};
  EgoState spawn{scenario.ego_spawn, scenario.ego_speed, cfg.vehicle.wheelbase};
  out.samples.push_back({0, spawn, project_to_route(scenario.route, scenario.ego_spawn).s});
  for (const auto& r : trace.ticks) out.samples.push_back({r.tick, EgoState{r.pose, r.speed, cfg.vehicle.wheelbase}, r.s});
  return out;
}

class InsufficientFuture : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

struct TrajectoryPairOptions {
  double waypoint_dt = 0.5;
  double lookahead = 20.0;
  PromptStyle style;
};

/// Ego-frame positions the autopilot actually reached 1..5 waypoint periods
/// after sample `index`.
inline Trajectory future_positions(const AutopilotTrace& trace, std::size_t index, double waypoint_dt) {
  const auto stride = static_cast<std::size_t>(std::llround(waypoint_dt / trace.dt));
  if (stride == 0 || index + kTrajectoryLength * stride >= trace.samples.size()) {
    throw InsufficientFuture("tick " + std::to_string(index) + " of '" + trace.route_id +
                             "' has fewer than five future waypoints");
  }
  const Pose2D& ego = trace.samples[index].ego.pose;
  Trajectory out;
  for (std::size_t k = 1; k <= kTrajectoryLength; ++k) {
    out[k - 1] = to_target(world_to_ego(ego, trace.samples[index + k * stride].ego.pose.position()));
  }
  return out;
}

inline std::string frame_ref(const std::string& episode, std::int64_t tick) {
  return episode + "/" + std::to_string(tick);
}

/// Training pair at sample `index`: the target prompt (no attention prefix)
/// and the five future waypoints the autopilot drove.
inline QAPair make_trajectory_pair(const RouteSpec& route, const AutopilotTrace& trace, std::size_t index,
                                   const TrajectoryPairOptions& opt = {}) {
  const Trajectory future = future_positions(trace, index, opt.waypoint_dt);
  const auto& sample = trace.samples[index];
  QAPair q;
  for (std::size_t k = 0; k < kFrameWindow; ++k) {
    const auto back = static_cast<std::int64_t>(kFrameWindow - 1 - k);
    const auto i = static_cast<std::int64_t>(index) - back;
    q.frames.push_back(frame_ref(trace.route_id, trace.samples[static_cast<std::size_t>(std::max<std::int64_t>(0, i))].tick));
  }
  q.question = format_prompt(next_target(route, sample.ego, sample.s, opt.lookahead), false, opt.style);
  q.answer = format_answer(quantize(future));
  q.task = Task::trajectory;
  q.source = "carla";
  return q;
}

// ---------------------------------------------------------------------------
// Knowledge datasets.

/// A record in a source dataset's native layout, reduced to what the
/// adapters need.
struct SourceRecord {
  std::string id;
  std::vector<std::string> frames;
  std::string description;
  std::string question;       // used by sources without a fixed template
  std::optional<std::size_t> keyframe;
  std::optional<Task> task;
};

inline SourceRecord source_from_json(const nlohmann::json& j) {
  SourceRecord r;
  r.id = j.value("id", std::string{});
  r.frames = j.at("frames").get<std::vector<std::string>>();
  r.description = j.at("description").get<std::string>();
  r.question = j.value("question", std::string{});
  if (j.contains("keyframe")) r.keyframe = j.at("keyframe").get<std::size_t>();
  if (j.contains("task")) r.task = task_from_string(j.at("task").get<std::string>());
  return r;
}

class UnknownSourceKind : public std::invalid_argument {
 public:
  explicit UnknownSourceKind(const std::string& k) : std::invalid_argument("unknown source kind '" + k + "'") {}
};

inline constexpr std::string_view kRiskQuestion = "What is the potential risk in the current scenario?";
inline constexpr std::string_view kSuggestionQuestion = "What is the suggested next action?";
inline constexpr std::string_view kActionQuestion = "What is the action of the ego car?";
inline constexpr std::string_view kActionQuestionShort = "What is the action of ego car?";
inline constexpr std::string_view kAttentionQuestion = "What the driver should pay attention?";

struct ReformulateOptions {
  bool short_action_template = false;  // "ego car" without the article
};

/// Maps a source record onto a QA pair. Sources with fixed templates get
/// their template question; the description is kept verbatim as the answer.
inline QAPair reformulate(std::string_view kind, const SourceRecord& rec, ReformulateOptions opt = {}) {
  if (rec.frames.empty()) throw std::invalid_argument("record '" + rec.id + "' has no frames");
  QAPair q;
  q.answer = rec.description;
  q.source = std::string(kind);
  const auto pick = [&](const std::vector<std::size_t>& idx) {
    for (auto i : idx) q.frames.push_back(rec.frames[i]);
  };

  if (kind == "drama_risk" || kind == "drama_suggestion" || kind == "bddx" || kind == "had") {
    pick(sample_frames(rec.frames.size()));
    if (kind == "drama_risk") {
      q.question = kRiskQuestion;
      q.task = Task::risk;
    } else if (kind == "drama_suggestion") {
      q.question = kSuggestionQuestion;
      q.task = Task::suggestion;
    } else if (kind == "bddx") {
      q.question = opt.short_action_template ? kActionQuestionShort : kActionQuestion;
      q.task = Task::action;
    } else {
      q.question = kAttentionQuestion;
      q.task = Task::attention;
    }
    return q;
  }
  if (kind == "lingoqa") {
    pick(sample_frames(rec.frames.size()));
    q.question = rec.question;
    q.task = rec.task.value_or(Task::reasoning);
    return q;
  }
  if (kind == "drivelm") {
    // Keyframe plus the four frames before it.
    const std::size_t key = std::min(rec.keyframe.value_or(rec.frames.size() - 1), rec.frames.size() - 1);
    for (std::size_t k = 0; k < kFrameWindow; ++k) {
      const auto back = kFrameWindow - 1 - k;
      q.frames.push_back(rec.frames[key >= back ? key - back : 0]);
    }
    q.question = rec.question;
    q.task = rec.task.value_or(Task::object);
    return q;
  }
  throw UnknownSourceKind(std::string(kind));
}

// ---------------------------------------------------------------------------
// Epoch mixtures.

struct MixtureSource {
  std::string tag;
  std::size_t repeat = 1;
};

struct MixtureSpec {
  std::vector<MixtureSource> sources;
  std::uint64_t seed = 0;
};

class UnknownTag : public std::invalid_argument {
 public:
  explicit UnknownTag(const std::string& t) : std::invalid_argument("unknown dataset tag '" + t + "'") {}
};

namespace detail {
/// Uniform integer in [0, bound) by rejection; independent of the standard
/// library's distribution implementation.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  for (;;) {
    const std::uint64_t r = rng();
    if (r < limit) return r % bound;
  }
}
}  // namespace detail

template <typename T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(detail::bounded(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

/// Each dataset repeated by its factor, then shuffled with the spec seed.
inline std::vector<QAPair> build_mixture(const MixtureSpec& spec, const std::map<std::string, std::vector<QAPair>>& datasets) {
  std::vector<QAPair> out;
  for (const auto& src : spec.sources) {
    if (src.repeat < 1) throw std::invalid_argument("repeat factor of '" + src.tag + "' must be >= 1");
    const auto it = datasets.find(src.tag);
    if (it == datasets.end()) throw UnknownTag(src.tag);
    for (std::size_t r = 0; r < src.repeat; ++r) out.insert(out.end(), it->second.begin(), it->second.end());
  }
  seeded_shuffle(out, spec.seed);
  return out;
}

}  // namespace loopdrive::datagen
