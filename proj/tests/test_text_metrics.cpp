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
#include <random>

#include "loopdrive/text_metrics.hpp"
#include "oracles.hpp"

namespace loopdrive::text {
namespace {

std::vector<oracle::Item> random_corpus(std::mt19937_64& rng, std::size_t n, std::size_t vocab) {
  std::uniform_int_distribution<std::size_t> len(1, 9), word(0, vocab - 1), nref(1, 3);
  const auto sentence = [&] {
    oracle::Sentence s(len(rng));
    for (auto& w : s) w = "w" + std::to_string(word(rng));
    return s;
  };
  std::vector<oracle::Item> out(n);
  for (auto& it : out) {
    it.hyp = sentence();
    for (std::size_t r = nref(rng); r > 0; --r) it.refs.push_back(sentence());
  }
  return out;
}

std::vector<ScoredPair> to_pairs(const std::vector<oracle::Item>& items) {
  std::vector<ScoredPair> out;
  for (std::size_t i = 0; i < items.size(); ++i) out.push_back({std::to_string(i), items[i].hyp, items[i].refs});
  return out;
}

TEST(Tokenize, LowercasesAndStripsPunctuation) {
  EXPECT_EQ(tokenize("The car, it's STOPPED!  Now."), (Tokens{"the", "car", "its", "stopped", "now"}));
  EXPECT_TRUE(tokenize(" ... ").empty());
}

TEST(Bleu, SelfIdentityIsOne) {
  const std::vector<ScoredPair> c{make_pair("a", "the car ahead is braking hard", {"the car ahead is braking hard"}),
                                  make_pair("b", "a pedestrian crosses the road", {"a pedestrian crosses the road"})};
  EXPECT_DOUBLE_EQ(bleu(c), 1.0);
  EXPECT_DOUBLE_EQ(sentence_bleu_mean(c), 1.0);
}

TEST(Bleu, RepeatedWordHandValue) {
  const std::vector<ScoredPair> c{make_pair("a", "the the the the", {"the cat sat down"})};
  const double want = std::pow(0.25 * (1e-9 / 3) * (1e-9 / 2) * 1e-9, 0.25);
  EXPECT_NEAR(bleu(c) / want, 1.0, 1e-12);
}

TEST(Bleu, BrevityPenalty) {
  const std::vector<ScoredPair> c{make_pair("a", "a b c d", {"a b c d e f g h"})};
  EXPECT_NEAR(bleu(c), std::exp(-1.0), 1e-15);
}

TEST(Bleu, ClosestReferenceLength) {
  // References of length 3 and 5 are equally close to 4; the shorter one wins.
  const std::vector<ScoredPair> c{make_pair("a", "a b c d", {"a b c", "a b c d e"})};
  const std::vector<oracle::Item> o{{{"a", "b", "c", "d"}, {{"a", "b", "c"}, {"a", "b", "c", "d", "e"}}}};
  EXPECT_NEAR(bleu(c), oracle::naive_bleu(o), 1e-15);
  EXPECT_DOUBLE_EQ(bleu(c), 1.0);
}

TEST(Bleu, MatchesNaiveDefinition) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto items = random_corpus(rng, 1 + trial % 7, 6);
    const auto pairs = to_pairs(items);
    const double want = oracle::naive_bleu(items);
    const double got = bleu(pairs);
    if (want == 0.0) {
      EXPECT_EQ(got, 0.0);
    } else {
      EXPECT_NEAR(got / want, 1.0, 1e-9) << "trial " << trial;
    }
  }
}

TEST(Bleu, EmptyCorpusThrows) { EXPECT_THROW(bleu(std::vector<ScoredPair>{}), EmptyCorpus); }

TEST(Cider, MatchesDenseBruteForce) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const auto items = random_corpus(rng, 2 + trial % 6, 5 + trial % 4);
    const auto pairs = to_pairs(items);
    const auto want = oracle::dense_cider(items);
    const auto got = cider_d(pairs);
    ASSERT_EQ(got.per_pair.size(), want.size());
    double mean = 0;
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_NEAR(got.per_pair[i], want[i], 1e-9) << "trial " << trial << " pair " << i;
      mean += want[i];
    }
    EXPECT_NEAR(got.mean, mean / static_cast<double>(want.size()), 1e-9);
  }
}

TEST(Cider, IdenticalUniqueSentencesScoreTen) {
  const std::vector<ScoredPair> c{make_pair("a", "red light ahead stop now", {"red light ahead stop now"}),
                                  make_pair("b", "cyclist on the right lane", {"cyclist on the right lane"}),
                                  make_pair("c", "merge slowly into traffic", {"merge slowly into traffic"})};
  const auto r = cider_d(c);
  for (double v : r.per_pair) EXPECT_NEAR(v, 10.0, 1e-9);
  EXPECT_NEAR(r.mean, 10.0, 1e-9);
}

TEST(Cider, BoundedAndLengthPenalised) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const auto r = cider_d(to_pairs(random_corpus(rng, 4, 6)));
    for (double v : r.per_pair) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 10.0 + 1e-9);
    }
  }
  const std::vector<ScoredPair> shorter{make_pair("a", "stop", {"stop at the line now please"}),
                                        make_pair("b", "go", {"go"})};
  EXPECT_LT(cider_d(shorter).per_pair[0], 10.0);
}

TEST(Cider, CorpusSizeErrors) {
  EXPECT_THROW(cider_d(std::vector<ScoredPair>{}), EmptyCorpus);
  EXPECT_THROW(cider_d(std::vector<ScoredPair>{make_pair("a", "x", {"x"})}), SingletonCorpus);
}

}  // namespace
}  // namespace loopdrive::text
