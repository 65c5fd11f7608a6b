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

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "loopdrive/route.hpp"

namespace loopdrive {

inline constexpr std::string_view kAttentionPrefix =
    "Pay attention to your surroundings and do not violate traffic rules.";
/// Wording used when the prefix is quoted in ablation reports.
inline constexpr std::string_view kAttentionPrefixAlt =
    "Pay attention to your surroundings and do not break traffic rules.";
inline constexpr std::string_view kAnswerLead = "The next five passing waypoints are ";

/// Magnitude above which a parsed coordinate is treated as hallucinated.
inline constexpr double kCoordinateBound = 200.0;

enum class PrefixWording { violate, break_rules };
/// `waypoint`: "Your target waypoint is (x, y), what are ...?"
/// `point`:    "Your target point is (x, y). What are ...?"
enum class PromptWording { waypoint, point };

struct PromptStyle {
  PrefixWording prefix = PrefixWording::violate;
  PromptWording body = PromptWording::waypoint;
};

/// Fixed two-decimal rendering: "-1.50", "12.00". Values that round to zero
/// print without a sign.
inline std::string format_coordinate(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("cannot format a non-finite coordinate");
  const long long cents = std::llround(v * 100.0);
  const unsigned long long mag = cents < 0 ? 0ULL - static_cast<unsigned long long>(cents)
                                           : static_cast<unsigned long long>(cents);
  std::string out = cents < 0 ? "-" : "";
  out += std::to_string(mag / 100);
  out += '.';
  const unsigned long long frac = mag % 100;
  out += static_cast<char>('0' + frac / 10);
  out += static_cast<char>('0' + frac % 10);
  return out;
}

/// Rounds to the two-decimal grid the codec can represent exactly.
inline double quantize_coordinate(double v) {
  const double q = static_cast<double>(std::llround(v * 100.0)) / 100.0;
  return q == 0.0 ? 0.0 : q;
}

inline Trajectory quantize(const Trajectory& t) {
  Trajectory q;
  for (std::size_t i = 0; i < t.size(); ++i) q[i] = {quantize_coordinate(t[i].x), quantize_coordinate(t[i].y)};
  return q;
}

inline std::string format_pair(const TargetWaypoint& p) {
  return "(" + format_coordinate(p.x) + ", " + format_coordinate(p.y) + ")";
}

inline std::string format_prompt(const TargetWaypoint& target, bool attention, PromptStyle style = {}) {
  std::string out;
  if (attention) {
    out += style.prefix == PrefixWording::violate ? kAttentionPrefix : kAttentionPrefixAlt;
    out += ' ';
  }
  if (style.body == PromptWording::waypoint) {
    out += "Your target waypoint is " + format_pair(target) + ", what are the next five passing waypoints?";
  } else {
    out += "Your target point is " + format_pair(target) + ". What are the next five passing waypoints?";
  }
  return out;
}

inline std::string format_answer(const Trajectory& traj) {
  std::string out(kAnswerLead);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (i) out += ", ";
    out += format_pair(traj[i]);
  }
  out += '.';
  return out;
}

enum class ParseError { fewer_than_five_pairs, non_finite_number, coordinate_out_of_bounds };

inline std::string_view to_string(ParseError e) {
  switch (e) {
    case ParseError::fewer_than_five_pairs: return "FewerThanFivePairs";
    case ParseError::non_finite_number: return "NonFiniteNumber";
    case ParseError::coordinate_out_of_bounds: return "CoordinateOutOfBounds";
  }
  return "FewerThanFivePairs";
}

class ParseResult {
 public:
  ParseResult(Trajectory t) : trajectory_(t) {}  // NOLINT(google-explicit-constructor)
  ParseResult(ParseError e) : error_(e) {}       // NOLINT(google-explicit-constructor)

  bool ok() const { return trajectory_.has_value(); }
  explicit operator bool() const { return ok(); }
  const Trajectory& value() const {
    if (!trajectory_) throw std::logic_error("ParseResult holds an error");
    return *trajectory_;
  }
  ParseError error() const { return error_; }

 private:
  std::optional<Trajectory> trajectory_;
  ParseError error_ = ParseError::fewer_than_five_pairs;
};

namespace detail {

struct Scanner {
  std::string_view s;
  std::size_t i = 0;

  bool done() const { return i >= s.size(); }
  void skip_space() {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  }
  bool eat(char c) {
    if (i < s.size() && s[i] == c) {
      ++i;
      return true;
    }
    return false;
  }
  bool digit() const { return i < s.size() && s[i] >= '0' && s[i] <= '9'; }

  bool eat_word_ci(std::string_view w) {
    if (s.size() - i < w.size()) return false;
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (std::tolower(static_cast<unsigned char>(s[i + k])) != w[k]) return false;
    }
    i += w.size();
    return true;
  }

  /// Signed decimal, or nan/inf spelled out. nullopt when nothing matched.
  std::optional<double> number() {
    const std::size_t start = i;
    bool negative = false;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
      negative = s[i] == '-';
      ++i;
    }
    if (eat_word_ci("nan")) return std::numeric_limits<double>::quiet_NaN();
    if (eat_word_ci("infinity") || eat_word_ci("inf")) {
      return negative ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    }
    const std::size_t body = i;
    bool any = false;
    while (digit()) {
      ++i;
      any = true;
    }
    if (eat('.')) {
      while (digit()) {
        ++i;
        any = true;
      }
    }
    if (!any) {
      i = start;
      return std::nullopt;
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data() + body, s.data() + i, v);
    if (ec == std::errc::result_out_of_range) v = std::numeric_limits<double>::infinity();
    else if (ec != std::errc{}) {
      i = start;
      return std::nullopt;
    }
    return negative ? -v : v;
  }
};

}  // namespace detail

/// Extracts the first five parenthesised "(x, y)" pairs from free text.
/// Whitespace, surrounding prose and separators between pairs are ignored.
inline ParseResult parse_answer(std::string_view text) {
  Trajectory out;
  std::size_t found = 0;
  bool non_finite = false;
  bool out_of_bounds = false;
  detail::Scanner sc{text};
  while (found < kTrajectoryLength && !sc.done()) {
    if (text[sc.i] != '(') {
      ++sc.i;
      continue;
    }
    const std::size_t open = sc.i++;
    sc.skip_space();
    const auto x = sc.number();
    sc.skip_space();
    bool matched = x && sc.eat(',');
    std::optional<double> y;
    if (matched) {
      sc.skip_space();
      y = sc.number();
      sc.skip_space();
      matched = y && sc.eat(')');
    }
    if (!matched) {
      sc.i = open + 1;
      continue;
    }
    for (double v : {*x, *y}) {
      if (!std::isfinite(v)) non_finite = true;
      else if (std::abs(v) > kCoordinateBound) out_of_bounds = true;
    }
    out[found++] = {*x, *y};
  }
  if (found < kTrajectoryLength) return ParseError::fewer_than_five_pairs;
  if (non_finite) return ParseError::non_finite_number;
  if (out_of_bounds) return ParseError::coordinate_out_of_bounds;
  return out;
}

}  // namespace loopdrive
