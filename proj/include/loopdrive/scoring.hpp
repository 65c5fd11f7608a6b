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
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "loopdrive/infraction.hpp"

namespace loopdrive {

enum class Termination { completed, timeout, blocked, deviated, aborted };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::completed: return "completed";
    case Termination::timeout: return "timeout";
    case Termination::blocked: return "blocked";
    case Termination::deviated: return "deviated";
    case Termination::aborted: return "aborted";
  }
  return "timeout";
}

/// Driving score on the percent scale: RC [0, 100] times IS (0, 1].
inline double episode_score(double route_completion, double infraction_score) {
  return route_completion * infraction_score;
}

struct EpisodeResult {
  std::string route_id;
  double route_completion = 0.0;
  double infraction_score = 1.0;
  double driving_score = 0.0;
  std::vector<InfractionEvent> events;
  std::int64_t ticks = 0;
  Termination termination = Termination::timeout;
  std::string error;  // non-empty when the episode aborted

  bool has(InfractionKind k) const {
    return std::any_of(events.begin(), events.end(), [k](const auto& e) { return e.kind == k; });
  }
  std::size_t count(InfractionKind k) const {
    return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [k](const auto& e) { return e.kind == k; }));
  }
};

inline EpisodeResult make_result(std::string route_id, double rc, std::vector<InfractionEvent> events,
                                 const PenaltyTable& table, std::int64_t ticks, Termination term) {
  EpisodeResult r;
  r.route_id = std::move(route_id);
  r.route_completion = rc;
  r.infraction_score = infraction_score(events, table);
  r.driving_score = episode_score(rc, r.infraction_score);
  r.events = std::move(events);
  r.ticks = ticks;
  r.termination = term;
  return r;
}

class EmptyBenchmark : public std::invalid_argument {
 public:
  EmptyBenchmark() : std::invalid_argument("benchmark has no episodes") {}
};

struct BenchmarkReport {
  double mean_driving_score = 0.0;
  double mean_route_completion = 0.0;
  double mean_infraction_score = 0.0;
  /// Routes with at least one event of the kind (0/1 per route).
  std::map<InfractionKind, std::size_t> routes_with;
  double normalize_per = 10.0;
  std::vector<EpisodeResult> rows;

  std::size_t route_count() const { return rows.size(); }
  std::size_t routes_with_kind(InfractionKind k) const {
    const auto it = routes_with.find(k);
    return it == routes_with.end() ? 0 : it->second;
  }
  /// Route count scaled to `normalize_per` routes.
  double normalized(InfractionKind k) const {
    return static_cast<double>(routes_with_kind(k)) * normalize_per / static_cast<double>(rows.size());
  }
};

inline BenchmarkReport aggregate(std::vector<EpisodeResult> results, double normalize_per = 10.0) {
  if (results.empty()) throw EmptyBenchmark();
  BenchmarkReport rep;
  rep.normalize_per = normalize_per;
  double ds = 0.0;
  double rc = 0.0;
  double is = 0.0;
  for (const auto& r : results) {
    ds += r.driving_score;
    rc += r.route_completion;
    is += r.infraction_score;
    for (auto k : kAllInfractionKinds) {
      if (r.has(k)) ++rep.routes_with[k];
    }
  }
  const auto n = static_cast<double>(results.size());
  rep.mean_driving_score = ds / n;
  rep.mean_route_completion = rc / n;
  rep.mean_infraction_score = is / n;
  rep.rows = std::move(results);
  return rep;
}

namespace detail {
inline std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}
inline std::string pad_left(std::string s, std::size_t w) {
  if (s.size() < w) s.insert(0, w - s.size(), ' ');
  return s;
}
inline std::string pad_right(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}
}  // namespace detail

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols{"Driving score", "Route compl", "Infrac. score",
                                             "Red light",     "Collision vehicle", "Agent blocked"};
  return cols;
}

/// One aligned table row in the closed-loop column order.
inline std::string render_row(std::string_view label, std::size_t label_width, double ds, double rc, double is,
                              double red, double collision, double blocked) {
  const auto& cols = report_columns();
  const double vals[] = {ds, rc, is, red, collision, blocked};
  std::string out = detail::pad_right(std::string(label), label_width);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out += " | ";
    out += detail::pad_left(detail::fixed2(vals[i]), cols[i].size());
  }
  return out;
}

/// Plain-text table: header, one row per route, then the aggregate row with
/// accident columns as raw route counts and as counts per `normalize_per` routes.
inline std::string render_table(const BenchmarkReport& rep) {
  std::size_t w = std::string_view("Mean (per 10 routes)").size();
  for (const auto& r : rep.rows) w = std::max(w, r.route_id.size());
  std::ostringstream os;
  std::string header = detail::pad_right("Route", w);
  for (const auto& c : report_columns()) header += " | " + c;
  os << header << " | Termination\n";
  os << std::string(header.size() + 14, '-') << '\n';
  for (const auto& r : rep.rows) {
    os << render_row(r.route_id, w, r.driving_score, r.route_completion, r.infraction_score,
                     r.has(InfractionKind::red_light) ? 1.0 : 0.0, r.has(InfractionKind::collision_vehicle) ? 1.0 : 0.0,
                     r.has(InfractionKind::agent_blocked) ? 1.0 : 0.0)
       << " | " << to_string(r.termination) << '\n';
  }
  os << std::string(header.size() + 14, '-') << '\n';
  os << render_row("Mean (route counts)", w, rep.mean_driving_score, rep.mean_route_completion,
                   rep.mean_infraction_score,
                   static_cast<double>(rep.routes_with_kind(InfractionKind::red_light)),
                   static_cast<double>(rep.routes_with_kind(InfractionKind::collision_vehicle)),
                   static_cast<double>(rep.routes_with_kind(InfractionKind::agent_blocked)))
     << '\n';
  char label[64];
  std::snprintf(label, sizeof label, "Mean (per %g routes)", rep.normalize_per);
  os << render_row(label, w, rep.mean_driving_score, rep.mean_route_completion, rep.mean_infraction_score,
                   rep.normalized(InfractionKind::red_light), rep.normalized(InfractionKind::collision_vehicle),
                   rep.normalized(InfractionKind::agent_blocked))
     << '\n';
  return os.str();
}

inline nlohmann::json to_json(const InfractionEvent& e) {
  return {{"kind", std::string(to_string(e.kind))}, {"tick", e.tick}, {"detail", e.detail}};
}

inline InfractionEvent event_from_json(const nlohmann::json& j) {
  return {infraction_kind_from_string(j.at("kind").get<std::string>()), j.at("tick").get<std::int64_t>(),
          j.value("detail", std::string{})};
}

inline nlohmann::json to_json(const EpisodeResult& r) {
  nlohmann::json ev = nlohmann::json::array();
  for (const auto& e : r.events) ev.push_back(to_json(e));
  nlohmann::json j{{"route_id", r.route_id},
                   {"route_completion", r.route_completion},
                   {"infraction_score", r.infraction_score},
                   {"driving_score", r.driving_score},
                   {"events", ev},
                   {"ticks", r.ticks},
                   {"termination", std::string(to_string(r.termination))}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline Termination termination_from_string(std::string_view s) {
  for (auto t : {Termination::completed, Termination::timeout, Termination::blocked, Termination::deviated,
                 Termination::aborted}) {
    if (to_string(t) == s) return t;
  }
  throw std::invalid_argument("unknown termination '" + std::string(s) + "'");
}

inline EpisodeResult result_from_json(const nlohmann::json& j) {
  EpisodeResult r;
  r.route_id = j.at("route_id").get<std::string>();
  r.route_completion = j.at("route_completion").get<double>();
  r.infraction_score = j.at("infraction_score").get<double>();
  r.driving_score = j.at("driving_score").get<double>();
  for (const auto& e : j.at("events")) r.events.push_back(event_from_json(e));
  r.ticks = j.at("ticks").get<std::int64_t>();
  r.termination = termination_from_string(j.at("termination").get<std::string>());
  r.error = j.value("error", std::string{});
  return r;
}

inline nlohmann::json to_json(const BenchmarkReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows) rows.push_back(to_json(r));
  nlohmann::json counts = nlohmann::json::object();
  nlohmann::json norm = nlohmann::json::object();
  for (auto k : kAllInfractionKinds) {
    counts[std::string(to_string(k))] = rep.routes_with_kind(k);
    norm[std::string(to_string(k))] = rep.normalized(k);
  }
  return {{"mean_driving_score", rep.mean_driving_score},
          {"mean_route_completion", rep.mean_route_completion},
          {"mean_infraction_score", rep.mean_infraction_score},
          {"route_count", rep.rows.size()},
          {"routes_with", counts},
          {"normalize_per", rep.normalize_per},
          {"routes_with_normalized", norm},
          {"rows", rows}};
}

}  // namespace loopdrive
