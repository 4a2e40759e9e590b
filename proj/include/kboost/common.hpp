// include/kboost/common.hpp

// Copyright 2026 The kboost Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kboost {

inline constexpr const char* kVersion = "0.1.0";

/// All recoverable failures in the library are reported with this type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Tokens = std::vector<std::string>;

/// Acoustic condition: an integer SNR in dB, or the unmodified recording.
/// Orders numerically, with "clean" after every dB value.
class Snr {
 public:
  constexpr Snr() = default;  // clean
  constexpr explicit Snr(int db) : db_(db) {}

  static constexpr Snr clean() { return Snr{}; }

  static Snr parse(std::string_view text) {
    if (text == "clean") return clean();
    int value = 0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (!text.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || first == last)
      throw Error("invalid SNR '" + std::string(text) +
                  "' (expected an integer dB value or 'clean')");
    return Snr(value);
  }

  bool is_clean() const { return !db_.has_value(); }
  int db() const {
    if (!db_) throw Error("SNR 'clean' has no dB value");
    return *db_;
  }

  std::string str() const { return db_ ? std::to_string(*db_) : "clean"; }

  friend bool operator==(const Snr&, const Snr&) = default;
  friend std::strong_ordering operator<=>(const Snr& a, const Snr& b) {
    if (a.is_clean() || b.is_clean())
      return static_cast<int>(a.is_clean()) <=> static_cast<int>(b.is_clean());
    return *a.db_ <=> *b.db_;
  }

 private:
  std::optional<int> db_;
};

/// 64-bit FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Quantile of sorted data with linear interpolation between order
/// statistics: position (n-1)*q.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error("quantile of empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw Error("quantile level outside [0,1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// Fixed-point rendering. printf rounds the exact binary value, so decimal
/// ties that are exactly representable go to even.
inline std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-')
    s.erase(0, 1);  // no "-0.0"
  return s;
}

/// Shortest text that reads back to the same double.
inline std::string format_exact(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view text, std::string_view what) {
  std::string tmp(text);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size())
    throw Error("invalid number for " + std::string(what) + ": '" + tmp + "'");
  return v;
}

inline std::vector<std::string_view> split_char(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace kboost
