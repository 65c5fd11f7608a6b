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

#include <random>

#include "loopdrive/scoring.hpp"

namespace loopdrive {
namespace {

EpisodeResult row(std::string id, double rc, std::vector<InfractionKind> kinds) {
  std::vector<InfractionEvent> ev;
  std::int64_t t = 0;
  for (auto k : kinds) ev.push_back({k, ++t, ""});
  return make_result(std::move(id), rc, ev, PenaltyTable::leaderboard(), 100, Termination::completed);
}

TEST(EpisodeScore, Exact) {
  EXPECT_EQ(episode_score(80.0, 0.60), 48.0);
  EXPECT_EQ(episode_score(100.0, 1.0), 100.0);
  EXPECT_EQ(episode_score(0.0, 0.5), 0.0);
}

TEST(EpisodeResult, CountsAndFlags) {
  const auto r = row("a", 50, {InfractionKind::red_light, InfractionKind::red_light, InfractionKind::collision_vehicle});
  EXPECT_EQ(r.count(InfractionKind::red_light), 2u);
  EXPECT_TRUE(r.has(InfractionKind::collision_vehicle));
  EXPECT_FALSE(r.has(InfractionKind::agent_blocked));
  EXPECT_NEAR(r.infraction_score, 0.294, 1e-15);
  EXPECT_NEAR(r.driving_score, 14.7, 1e-12);
}

TEST(Aggregate, MatchesHandSums) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> rc(0, 100);
  std::uniform_int_distribution<int> nev(0, 4), kind(0, 5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EpisodeResult> rs;
    const int n = 1 + trial % 13;
    for (int i = 0; i < n; ++i) {
      std::vector<InfractionKind> k;
      for (int e = nev(rng); e > 0; --e) k.push_back(kAllInfractionKinds[static_cast<std::size_t>(kind(rng))]);
      rs.push_back(row("r" + std::to_string(i), rc(rng), k));
    }
    long double ds = 0, rcs = 0, is = 0;
    std::size_t red = 0;
    for (const auto& r : rs) {
      ds += r.route_completion * r.infraction_score;
      rcs += r.route_completion;
      is += r.infraction_score;
      red += r.count(InfractionKind::red_light) > 0;
    }
    const auto rep = aggregate(rs, 10.0);
    EXPECT_NEAR(rep.mean_driving_score, static_cast<double>(ds / n), 1e-9);
    EXPECT_NEAR(rep.mean_route_completion, static_cast<double>(rcs / n), 1e-9);
    EXPECT_NEAR(rep.mean_infraction_score, static_cast<double>(is / n), 1e-9);
    EXPECT_EQ(rep.routes_with_kind(InfractionKind::red_light), red);
    EXPECT_NEAR(rep.normalized(InfractionKind::red_light), static_cast<double>(red) * 10.0 / n, 1e-12);
  }
}

TEST(Aggregate, EmptyThrows) { EXPECT_THROW(aggregate({}), EmptyBenchmark); }

TEST(Aggregate, RouteCountsNotEventCounts) {
  const auto rep = aggregate({row("a", 100, {InfractionKind::red_light, InfractionKind::red_light}), row("b", 100, {})}, 10);
  EXPECT_EQ(rep.routes_with_kind(InfractionKind::red_light), 1u);
  EXPECT_EQ(rep.normalized(InfractionKind::red_light), 5.0);
}

TEST(Report, RowLayout) {
  const std::string r = render_row("x", 3, 48.0, 80.0, 0.6, 1, 0, 2);
  EXPECT_EQ(r, "x   |         48.00 |       80.00 |          0.60 |      1.00 |              0.00 |          2.00");
}

TEST(Report, TableHasAggregateRows) {
  const auto rep = aggregate({row("a", 80, {InfractionKind::collision_vehicle}), row("b", 100, {})}, 10);
  const auto t = render_table(rep);
  EXPECT_NE(t.find("Route                | Driving score | Route compl | Infrac. score | Red light | Collision vehicle "
                   "| Agent blocked | Termination"),
            std::string::npos);
  EXPECT_NE(t.find("Mean (route counts)  |         74.00 |       90.00 |          0.80 |      0.00 |              1.00"),
            std::string::npos);
  EXPECT_NE(t.find("Mean (per 10 routes) |         74.00 |       90.00 |          0.80 |      0.00 |              5.00"),
            std::string::npos);
}

TEST(Report, JsonRoundTrip) {
  auto r = row("a", 42.5, {InfractionKind::collision_static});
  r.termination = Termination::deviated;
  const auto back = result_from_json(to_json(r));
  EXPECT_EQ(to_json(back), to_json(r));
  EXPECT_THROW(termination_from_string("crashed"), std::invalid_argument);
}

}  // namespace
}  // namespace loopdrive
