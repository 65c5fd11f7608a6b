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

#include <map>

#include "loopdrive/datagen.hpp"
#include "loopdrive/suite.hpp"

namespace loopdrive::datagen {
namespace {

// Rounding j*(L-1)/(k-1) half up, enumerated with exact rationals.
std::vector<std::size_t> frames_by_enumeration(std::size_t L, std::size_t k) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t num = j * (L - 1);
    const std::size_t den = k - 1;
    std::size_t best = 0;
    for (std::size_t c = 0; c < L; ++c) {
      // c is the rounding of num/den when c - 1/2 <= num/den < c + 1/2.
      if (2 * num + den >= 2 * c * den && 2 * num + den < 2 * (c + 1) * den) best = c;
    }
    out.push_back(best);
  }
  return out;
}

QAPair qa(std::string tag, int i) {
  QAPair q;
  q.question = tag + " q" + std::to_string(i);
  q.answer = "a";
  q.source = std::move(tag);
  return q;
}

TEST(SampleFrames, KnownValues) {
  EXPECT_EQ(sample_frames(9, 5), (std::vector<std::size_t>{0, 2, 4, 6, 8}));
  EXPECT_EQ(sample_frames(5, 5), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(sample_frames(3, 5), (std::vector<std::size_t>{0, 1, 2, 2, 2}));
  EXPECT_EQ(sample_frames(1, 5), (std::vector<std::size_t>{0, 0, 0, 0, 0}));
  EXPECT_THROW(sample_frames(0, 5), std::invalid_argument);
}

TEST(SampleFrames, MatchesEnumeration) {
  for (std::size_t L = 5; L < 300; ++L) {
    for (std::size_t k = 2; k <= 7; ++k) {
      if (L < k) continue;
      const auto got = sample_frames(L, k);
      ASSERT_EQ(got, frames_by_enumeration(L, k)) << "L=" << L << " k=" << k;
      ASSERT_EQ(got.front(), 0u);
      ASSERT_EQ(got.back(), L - 1);
      for (std::size_t i = 1; i < got.size(); ++i) ASSERT_GT(got[i], got[i - 1]);
    }
  }
}

TEST(Reformulate, FixedTemplates) {
  SourceRecord r{"r", {"f0", "f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8"}, "A cyclist is merging.", "", {}, {}};
  const auto risk = reformulate("drama_risk", r);
  EXPECT_EQ(risk.question, "What is the potential risk in the current scenario?");
  EXPECT_EQ(risk.answer, "A cyclist is merging.");
  EXPECT_EQ(risk.frames, (std::vector<std::string>{"f0", "f2", "f4", "f6", "f8"}));
  EXPECT_EQ(reformulate("drama_suggestion", r).question, "What is the suggested next action?");
  EXPECT_EQ(reformulate("bddx", r).question, "What is the action of the ego car?");
  EXPECT_EQ(reformulate("bddx", r, {true}).question, "What is the action of ego car?");
  EXPECT_EQ(reformulate("had", r).question, "What the driver should pay attention?");
  EXPECT_EQ(reformulate("had", r).task, Task::attention);
  EXPECT_THROW(reformulate("kitti", r), UnknownSourceKind);
}

TEST(Reformulate, KeyframeWindowAndFreeQuestions) {
  SourceRecord r{"r", {"a", "b", "c", "d", "e", "f", "g"}, "Two cars.", "How many cars are ahead?", 5, {}};
  const auto d = reformulate("drivelm", r);
  EXPECT_EQ(d.frames, (std::vector<std::string>{"b", "c", "d", "e", "f"}));
  EXPECT_EQ(d.question, "How many cars are ahead?");
  EXPECT_EQ(d.task, Task::object);
  r.keyframe = 1;
  EXPECT_EQ(reformulate("drivelm", r).frames, (std::vector<std::string>{"a", "a", "a", "a", "b"}));
  const auto l = reformulate("lingoqa", r);
  EXPECT_EQ(l.question, "How many cars are ahead?");
  EXPECT_EQ(l.frames.size(), 5u);
}

TEST(Mixture, CountLaw) {
  std::map<std::string, std::vector<QAPair>> ds;
  for (int i = 0; i < 7; ++i) ds["carla"].push_back(qa("carla", i));
  for (int i = 0; i < 4; ++i) ds["had"].push_back(qa("had", i));
  const MixtureSpec spec{{{"carla", 2}, {"had", 3}}, 5};
  const auto m = build_mixture(spec, ds);
  ASSERT_EQ(m.size(), 7u * 2 + 4u * 3);
  std::map<std::string, int> per_q;
  for (const auto& q : m) ++per_q[q.question];
  for (const auto& [question, n] : per_q) EXPECT_EQ(n, question.rfind("carla", 0) == 0 ? 2 : 3) << question;
  EXPECT_EQ(to_json(build_mixture(spec, ds).front()), to_json(m.front()));
  const MixtureSpec other{{{"carla", 2}, {"had", 3}}, 6};
  bool differs = false;
  const auto m2 = build_mixture(other, ds);
  for (std::size_t i = 0; i < m.size(); ++i) differs = differs || m[i].question != m2[i].question;
  EXPECT_TRUE(differs);
  EXPECT_THROW(build_mixture({{{"bddx", 1}}, 0}, ds), UnknownTag);
}

TEST(Mixture, ShuffleIsAPermutation) {
  std::vector<int> v(1000);
  for (int i = 0; i < 1000; ++i) v[static_cast<std::size_t>(i)] = i;
  auto w = v;
  seeded_shuffle(w, 3);
  EXPECT_NE(w, v);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(w, v);
}

TEST(TrajectoryPairs, AnswersMatchDrivenFuture) {
  const HarnessConfig cfg;
  const auto r = cfg.resolved();
  for (const auto& sc : suite::smoke_suite()) {
    OraclePlanner p(r.oracle);
    const auto run = run_episode(sc, p, cfg);
    const auto tr = autopilot_trace(sc, run.trace, r);
    ASSERT_EQ(tr.samples.size(), run.trace.ticks.size() + 1);
    std::size_t made = 0;
    for (std::size_t i = 0; i < tr.samples.size(); i += 7) {
      QAPair q;
      try {
        q = make_trajectory_pair(sc.route, tr, i);
      } catch (const InsufficientFuture&) {
        EXPECT_GE(i + 25, tr.samples.size());
        continue;
      }
      ++made;
      EXPECT_EQ(q.question.rfind("Your target waypoint is (", 0), 0u);
      EXPECT_EQ(q.source, "carla");
      const auto parsed = parse_answer(q.answer);
      ASSERT_TRUE(parsed.ok());
      const Pose2D& ego = tr.samples[i].ego.pose;
      for (std::size_t k = 0; k < 5; ++k) {
        const Vec2 truth = tr.samples[i + 5 * (k + 1)].ego.pose.position();
        const Vec2 got = ego_to_world(ego, {parsed.value()[k].x, parsed.value()[k].y});
        EXPECT_LE(norm(got - truth), 0.01);
      }
    }
    EXPECT_GT(made, 5u) << sc.id;
  }
}

TEST(QAPairJson, RoundTrip) {
  QAPair q = qa("lingoqa", 3);
  q.frames = {"x/1", "x/2"};
  q.task = Task::description;
  EXPECT_EQ(to_json(qa_from_json(to_json(q))), to_json(q));
}

}  // namespace
}  // namespace loopdrive::datagen
