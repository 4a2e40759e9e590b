// include/kboost/scoring.hpp

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

// Word error rates: Levenshtein alignment and pooled per-cell rates.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "kboost/binning.hpp"
#include "kboost/common.hpp"
#include "kboost/corpus.hpp"
#include "kboost/parallel.hpp"

namespace kboost {

struct EditStats {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t ref_len = 0;

  std::size_t errors() const { return substitutions + insertions + deletions; }
  double rate() const { return static_cast<double>(errors()) / static_cast<double>(ref_len); }

  EditStats& operator+=(const EditStats& o) {
    substitutions += o.substitutions;
    insertions += o.insertions;
    deletions += o.deletions;
    ref_len += o.ref_len;
    return *this;
  }
  friend bool operator==(const EditStats&, const EditStats&) = default;
};

/// Minimum-edit alignment with unit costs. On the backtrace a diagonal step
/// (match or substitution) is preferred over deletion, and deletion over
/// insertion.
template <typename T>
EditStats align(std::span<const T> ref, std::span<const T> hyp) {
  if (ref.empty()) throw Error("cannot align against an empty reference");
  const std::size_t R = ref.size(), H = hyp.size(), W = H + 1;
  std::vector<std::size_t> d((R + 1) * W);
  for (std::size_t j = 0; j <= H; ++j) d[j] = j;
  for (std::size_t i = 1; i <= R; ++i) {
    d[i * W] = i;
    for (std::size_t j = 1; j <= H; ++j) {
      const std::size_t diag = d[(i - 1) * W + j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      d[i * W + j] = std::min({diag, d[(i - 1) * W + j] + 1, d[i * W + j - 1] + 1});
    }
  }
  EditStats s;
  s.ref_len = R;
  std::size_t i = R, j = H;
  while (i > 0 || j > 0) {
    const std::size_t cur = d[i * W + j];
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (cur == d[(i - 1) * W + j - 1] + (same ? 0 : 1)) {
        if (!same) ++s.substitutions;
        --i, --j;
        continue;
      }
    }
    if (i > 0 && cur == d[(i - 1) * W + j] + 1) {
      ++s.deletions;
      --i;
    } else {
      ++s.insertions;
      --j;
    }
  }
  return s;
}

inline EditStats align(const Tokens& ref, const Tokens& hyp) {
  return align(std::span<const std::string>(ref), std::span<const std::string>(hyp));
}

inline constexpr std::string_view kAllLabel = "all";

/// Pooled error rate of one (system, partition, bin, SNR) cell.
struct ErrorRatePoint {
  std::string system;
  std::string partition;
  std::string bin;
  Snr snr;
  double e = 0.0;  // min(1, errors / n_ref_words)
  std::size_t n_ref_words = 0;
  std::size_t n_errors = 0;
  bool clamped = false;

  friend bool operator==(const ErrorRatePoint&, const ErrorRatePoint&) = default;
};

struct PooledRate {
  double e = 0.0;
  double raw = 0.0;
  std::size_t n_ref_words = 0;
  std::size_t n_errors = 0;
  bool clamped = false;
};

/// Micro-average over utterances, clamped to 1 at the cell level.
inline PooledRate pool(std::span<const EditStats> stats) {
  if (stats.empty()) throw Error("cannot pool an empty group");
  EditStats total;
  for (const auto& s : stats) total += s;
  if (total.ref_len == 0) throw Error("pooled group has no reference words");
  PooledRate out;
  out.n_ref_words = total.ref_len;
  out.n_errors = total.errors();
  out.raw = total.rate();
  out.clamped = out.raw > 1.0;
  out.e = std::min(1.0, out.raw);
  return out;
}

/// Position of a bin label in report order: BinSpec labels, then "all".
inline std::size_t bin_rank(const BinSpec& spec, std::string_view label) {
  const auto& labels = spec.labels();
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return i;
  return labels.size() + (label == kAllLabel ? 0 : 1);
}

inline void sort_points(std::vector<ErrorRatePoint>& points, const BinSpec& spec) {
  std::stable_sort(points.begin(), points.end(), [&](const auto& a, const auto& b) {
    return std::forward_as_tuple(a.partition, bin_rank(spec, a.bin), a.bin, a.system, a.snr) <
           std::forward_as_tuple(b.partition, bin_rank(spec, b.bin), b.bin, b.system, b.snr);
  });
}

/// Scores one system's hypotheses over a partition. Produces a cell for every
/// nonempty (bin, SNR) group and an "all" cell per SNR covering the whole
/// partition, OUT utterances included. Every utterance needs an NLL and a
/// hypothesis at every SNR present in the partition.
inline std::vector<ErrorRatePoint> score_cells(const Partition& part, const BinSpec& spec,
                                               const std::string& system, unsigned threads = 0) {
  const auto& utts = part.utterances();
  std::vector<std::string> problems;
  for (const auto& u : utts)
    if (!u.nll) problems.push_back(u.id);
  if (!problems.empty()) {
    std::string msg = "utterances without NLL in " + part.name() + ":";
    for (const auto& id : problems) msg += " " + id;
    throw Error(msg);
  }
  const std::vector<Snr> snrs = part.snrs();
  if (snrs.empty()) throw Error("partition " + part.name() + " has no hypotheses");
  for (const Snr& s : snrs)
    for (const auto& u : utts)
      if (!u.hypotheses.count(s)) problems.push_back(u.id + "@" + s.str());
  if (!problems.empty()) {
    std::string msg = "missing hypotheses in " + part.name() + ":";
    for (const auto& id : problems) msg += " " + id;
    throw Error(msg);
  }

  std::vector<std::vector<EditStats>> stats(utts.size());
  parallel_for(utts.size(), threads, [&](std::size_t i) {
    for (const Snr& s : snrs) stats[i].push_back(align(utts[i].reference, utts[i].hypotheses.at(s)));
  });

  std::vector<ErrorRatePoint> out;
  for (std::size_t k = 0; k < snrs.size(); ++k) {
    std::map<std::string, std::vector<EditStats>> groups;
    for (std::size_t i = 0; i < utts.size(); ++i) {
      groups[std::string(kAllLabel)].push_back(stats[i][k]);
      const std::string_view label = spec.assign(*utts[i].nll);
      if (label != kOutLabel) groups[std::string(label)].push_back(stats[i][k]);
    }
    for (const auto& [label, group] : groups) {
      const PooledRate r = pool(group);
      out.push_back({system, part.name(), label, snrs[k], r.e, r.n_ref_words, r.n_errors, r.clamped});
    }
  }
  sort_points(out, spec);
  return out;
}

inline constexpr std::string_view kWerCsvHeader = "system,partition,bin,snr,e,n_ref_words,clamped";

inline std::string wer_csv(const std::vector<ErrorRatePoint>& points) {
  std::ostringstream out;
  out << kWerCsvHeader << '\n';
  for (const auto& p : points)
    out << p.system << ',' << p.partition << ',' << p.bin << ',' << p.snr.str() << ','
        << format_exact(p.e) << ',' << p.n_ref_words << ',' << (p.clamped ? 1 : 0) << '\n';
  return out.str();
}

inline void write_wer_csv(const std::vector<ErrorRatePoint>& points,
                          const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << wer_csv(points);
}

/// Reads cells back. The error count is recovered as round(e * n) for
/// unclamped cells and n for clamped ones.
inline std::vector<ErrorRatePoint> read_wer_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string raw;
  if (!std::getline(in, raw) || strip_cr(raw) != kWerCsvHeader)
    throw Error(path.string() + ":1: expected header '" + std::string(kWerCsvHeader) + "'");
  std::vector<ErrorRatePoint> out;
  std::size_t lineno = 1;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto line = strip_cr(raw);
    if (line.empty()) continue;
    const auto f = split_char(line, ',');
    const auto where = path.string() + ":" + std::to_string(lineno) + ": ";
    if (f.size() != 7) throw Error(where + "expected 7 fields");
    try {
      ErrorRatePoint p;
      p.system = std::string(f[0]);
      p.partition = std::string(f[1]);
      p.bin = std::string(f[2]);
      p.snr = Snr::parse(f[3]);
      p.e = parse_double(f[4], "e");
      const double n = parse_double(f[5], "n_ref_words");
      if (!(p.e >= 0.0 && p.e <= 1.0)) throw Error("e outside [0,1]");
      if (!(n >= 1.0) || n != std::floor(n)) throw Error("n_ref_words must be a positive integer");
      p.n_ref_words = static_cast<std::size_t>(n);
      if (f[6] != "0" && f[6] != "1") throw Error("clamped must be 0 or 1");
      p.clamped = f[6] == "1";
      if (p.clamped && p.e != 1.0) throw Error("clamped cell must have e = 1");
      p.n_errors = p.clamped ? p.n_ref_words
                             : static_cast<std::size_t>(std::llround(p.e * n));
      out.push_back(std::move(p));
    } catch (const Error& e) {
      throw Error(where + e.what());
    }
  }
  return out;
}

}  // namespace kboost
