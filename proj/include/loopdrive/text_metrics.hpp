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
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace loopdrive::text {

using Tokens = std::vector<std::string>;

/// Lowercases ASCII letters, drops ASCII punctuation, splits on whitespace.
inline Tokens tokenize(std::string_view s) {
  Tokens out;
  std::string cur;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else if (std::ispunct(c)) {
      continue;
    } else {
      cur += static_cast<char>(std::tolower(c));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

struct ScoredPair {
  std::string id;
  Tokens hypothesis;
  std::vector<Tokens> references;
};

inline ScoredPair make_pair(std::string id, std::string_view hypothesis, const std::vector<std::string>& refs) {
  ScoredPair p{std::move(id), tokenize(hypothesis), {}};
  for (const auto& r : refs) p.references.push_back(tokenize(r));
  return p;
}

class EmptyCorpus : public std::invalid_argument {
 public:
  EmptyCorpus() : std::invalid_argument("corpus is empty") {}
};
class SingletonCorpus : public std::invalid_argument {
 public:
  SingletonCorpus() : std::invalid_argument("CIDEr-D needs at least two pairs for document frequency") {}
};

using NgramCounts = std::unordered_map<std::string, double>;

/// Counts of n-grams of exactly order n, keyed by space-joined tokens.
inline NgramCounts ngrams(const Tokens& t, std::size_t n) {
  NgramCounts out;
  if (t.size() < n) return out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    std::string key = t[i];
    for (std::size_t k = 1; k < n; ++k) {
      key += ' ';
      key += t[i + k];
    }
    out[key] += 1.0;
  }
  return out;
}

struct BleuOptions {
  std::size_t max_n = 4;
  double epsilon = 1e-9;  // replaces a zero clipped count
};

struct BleuStats {
  std::vector<double> matches;
  std::vector<double> totals;
  double hyp_length = 0.0;
  double ref_length = 0.0;
};

inline void accumulate_bleu(const ScoredPair& p, std::size_t max_n, BleuStats& st) {
  if (p.references.empty()) throw std::invalid_argument("pair '" + p.id + "' has no references");
  const double c = static_cast<double>(p.hypothesis.size());
  // Closest reference length, shorter on ties.
  double best = static_cast<double>(p.references.front().size());
  for (const auto& r : p.references) {
    const double len = static_cast<double>(r.size());
    if (std::abs(len - c) < std::abs(best - c) || (std::abs(len - c) == std::abs(best - c) && len < best)) best = len;
  }
  st.hyp_length += c;
  st.ref_length += best;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto hyp = ngrams(p.hypothesis, n);
    NgramCounts max_ref;
    for (const auto& r : p.references) {
      for (const auto& [g, cnt] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], cnt);
    }
    double m = 0.0;
    double total = 0.0;
    for (const auto& [g, cnt] : hyp) {
      total += cnt;
      const auto it = max_ref.find(g);
      if (it != max_ref.end()) m += std::min(cnt, it->second);
    }
    st.matches[n - 1] += m;
    st.totals[n - 1] += total;
  }
}

inline double bleu_from_stats(const BleuStats& st, const BleuOptions& opt) {
  if (st.hyp_length == 0.0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < opt.max_n; ++n) {
    const double m = st.matches[n] > 0.0 ? st.matches[n] : opt.epsilon;
    const double t = st.totals[n] > 0.0 ? st.totals[n] : 1.0;
    log_sum += std::log(m / t);
  }
  const double bp = std::exp(std::min(0.0, 1.0 - st.ref_length / st.hyp_length));
  return bp * std::exp(log_sum / static_cast<double>(opt.max_n));
}

/// Corpus-level BLEU: clipped n-gram counts and lengths are pooled over the
/// corpus before the geometric mean and brevity penalty.
inline double bleu(std::span<const ScoredPair> corpus, BleuOptions opt = {}) {
  if (corpus.empty()) throw EmptyCorpus();
  BleuStats st{std::vector<double>(opt.max_n, 0.0), std::vector<double>(opt.max_n, 0.0)};
  for (const auto& p : corpus) accumulate_bleu(p, opt.max_n, st);
  return bleu_from_stats(st, opt);
}

/// Mean of per-pair sentence BLEU scores.
inline double sentence_bleu_mean(std::span<const ScoredPair> corpus, BleuOptions opt = {}) {
  if (corpus.empty()) throw EmptyCorpus();
  double sum = 0.0;
  for (const auto& p : corpus) {
    BleuStats st{std::vector<double>(opt.max_n, 0.0), std::vector<double>(opt.max_n, 0.0)};
    accumulate_bleu(p, opt.max_n, st);
    sum += bleu_from_stats(st, opt);
  }
  return sum / static_cast<double>(corpus.size());
}

struct CiderOptions {
  std::size_t max_n = 4;
  double sigma = 6.0;
};

struct CiderResult {
  double mean = 0.0;
  std::vector<double> per_pair;
};

namespace detail {

struct TfIdfVector {
  std::vector<NgramCounts> weights;  // per order
  std::vector<double> norms;
  double length = 0.0;
};

inline TfIdfVector tfidf(const Tokens& t, const std::unordered_map<std::string, double>& df, double log_docs,
                         std::size_t max_n) {
  TfIdfVector v{std::vector<NgramCounts>(max_n), std::vector<double>(max_n, 0.0), static_cast<double>(t.size())};
  for (std::size_t n = 1; n <= max_n; ++n) {
    for (const auto& [g, tf] : ngrams(t, n)) {
      const auto it = df.find(g);
      const double log_df = std::log(std::max(1.0, it == df.end() ? 0.0 : it->second));
      const double w = tf * (log_docs - log_df);
      v.weights[n - 1][g] = w;
      v.norms[n - 1] += w * w;
    }
    v.norms[n - 1] = std::sqrt(v.norms[n - 1]);
  }
  return v;
}

}  // namespace detail

/// CIDEr-D with clipped TF-IDF n-gram cosines, a Gaussian length penalty on
/// token counts, and the conventional x10 scale (per-pair range [0, 10]).
inline CiderResult cider_d(std::span<const ScoredPair> corpus, CiderOptions opt = {}) {
  if (corpus.empty()) throw EmptyCorpus();
  if (corpus.size() < 2) throw SingletonCorpus();

  std::unordered_map<std::string, double> df;
  for (const auto& p : corpus) {
    if (p.references.empty()) throw std::invalid_argument("pair '" + p.id + "' has no references");
    std::set<std::string> seen;
    for (const auto& r : p.references) {
      for (std::size_t n = 1; n <= opt.max_n; ++n) {
        for (const auto& entry : ngrams(r, n)) seen.insert(entry.first);
      }
    }
    for (const auto& g : seen) df[g] += 1.0;
  }
  const double log_docs = std::log(static_cast<double>(corpus.size()));

  CiderResult res;
  for (const auto& p : corpus) {
    const auto hyp = detail::tfidf(p.hypothesis, df, log_docs, opt.max_n);
    std::vector<double> acc(opt.max_n, 0.0);
    for (const auto& r : p.references) {
      const auto ref = detail::tfidf(r, df, log_docs, opt.max_n);
      const double delta = hyp.length - ref.length;
      const double penalty = std::exp(-(delta * delta) / (2.0 * opt.sigma * opt.sigma));
      for (std::size_t n = 0; n < opt.max_n; ++n) {
        double val = 0.0;
        for (const auto& [g, w] : hyp.weights[n]) {
          const auto it = ref.weights[n].find(g);
          if (it != ref.weights[n].end()) val += std::min(w, it->second) * it->second;
        }
        if (hyp.norms[n] != 0.0 && ref.norms[n] != 0.0) val /= hyp.norms[n] * ref.norms[n];
        acc[n] += val * penalty;
      }
    }
    double mean = 0.0;
    for (double a : acc) mean += a;
    mean /= static_cast<double>(opt.max_n);
    mean /= static_cast<double>(p.references.size());
    res.per_pair.push_back(mean * 10.0);
  }
  double sum = 0.0;
  for (double v : res.per_pair) sum += v;
  res.mean = sum / static_cast<double>(res.per_pair.size());
  return res;
}

}  // namespace loopdrive::text
