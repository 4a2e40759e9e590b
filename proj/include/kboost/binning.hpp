// include/kboost/binning.hpp

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

// Predictability bins over per-utterance NLL.
//
// Bins are half-open intervals (lo, hi] between consecutive cutpoints, listed
// from most predictable (lowest NLL) to least. With three bins the labels are
// HP, LP and ZP; ZP is the reference ("isolated") condition. Anything at or
// below the first cut or above the last is OUT.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "kboost/common.hpp"
#include "kboost/corpus.hpp"

namespace kboost {

inline constexpr std::string_view kOutLabel = "OUT";

enum class BinMode { EqualWidth, EqualMass };

inline std::string to_string(BinMode m) {
  return m == BinMode::EqualWidth ? "equal-width" : "equal-mass";
}

class BinSpec {
 public:
  BinSpec() = default;

  BinSpec(std::vector<double> cuts, std::vector<std::string> labels, double trim,
          BinMode mode = BinMode::EqualWidth, std::string source = {})
      : cuts_(std::move(cuts)),
        labels_(std::move(labels)),
        trim_(trim),
        mode_(mode),
        source_(std::move(source)) {
    if (cuts_.size() < 2) throw Error("a bin spec needs at least two cutpoints");
    if (labels_.size() + 1 != cuts_.size()) throw Error("need exactly one label per interval");
    for (std::size_t i = 0; i < cuts_.size(); ++i) {
      if (!std::isfinite(cuts_[i])) throw Error("cutpoints must be finite");
      if (i && !(cuts_[i - 1] < cuts_[i])) throw Error("cutpoints must be strictly increasing");
    }
    for (const auto& l : labels_)
      if (l.empty() || l == kOutLabel || l == "all") throw Error("invalid bin label '" + l + "'");
  }

  static std::vector<std::string> default_labels(std::size_t n_bins) {
    if (n_bins == 3) return {"HP", "LP", "ZP"};
    std::vector<std::string> out;
    for (std::size_t i = 1; i <= n_bins; ++i) out.push_back("B" + std::to_string(i));
    return out;
  }

  const std::vector<double>& cuts() const { return cuts_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t n_bins() const { return labels_.size(); }
  double trim() const { return trim_; }
  BinMode mode() const { return mode_; }
  const std::string& source() const { return source_; }

  /// The least predictable bin, used as the isolated condition.
  const std::string& reference_label() const { return labels_.back(); }

  std::optional<std::size_t> index(double nll) const {
    if (!(nll > cuts_.front()) || nll > cuts_.back()) return std::nullopt;
    // First cut >= nll closes the interval containing it.
    const auto it = std::lower_bound(cuts_.begin() + 1, cuts_.end(), nll);
    return static_cast<std::size_t>(it - cuts_.begin()) - 1;
  }

  std::string_view assign(double nll) const {
    if (!std::isfinite(nll)) throw Error("cannot bin a non-finite NLL");
    const auto i = index(nll);
    return i ? std::string_view(labels_[*i]) : kOutLabel;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["source"] = source_;
    j["mode"] = to_string(mode_);
    j["trim"] = trim_;
    j["n_bins"] = n_bins();
    j["cuts"] = cuts_;
    j["labels"] = labels_;
    return j;
  }

  static BinSpec from_json(const nlohmann::json& j) {
    try {
      const std::string mode = j.at("mode").get<std::string>();
      if (mode != "equal-width" && mode != "equal-mass") throw Error("unknown bin mode '" + mode + "'");
      BinSpec spec(j.at("cuts").get<std::vector<double>>(),
                   j.at("labels").get<std::vector<std::string>>(), j.at("trim").get<double>(),
                   mode == "equal-width" ? BinMode::EqualWidth : BinMode::EqualMass,
                   j.value("source", std::string{}));
      if (j.contains("n_bins") && j.at("n_bins").get<std::size_t>() != spec.n_bins())
        throw Error("n_bins disagrees with the number of labels");
      return spec;
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string("malformed bin spec: ") + e.what());
    }
  }

  /// Identifies the bin layout in reports; equal BinSpecs hash equally.
  std::string hash() const { return hex64(fnv1a(to_json().dump())); }

  friend bool operator==(const BinSpec& a, const BinSpec& b) {
    return a.cuts_ == b.cuts_ && a.labels_ == b.labels_ && a.trim_ == b.trim_ &&
           a.mode_ == b.mode_ && a.source_ == b.source_;
  }

 private:
  std::vector<double> cuts_;
  std::vector<std::string> labels_;
  double trim_ = 0.0;
  BinMode mode_ = BinMode::EqualWidth;
  std::string source_;
};

inline void save_bins(const BinSpec& spec, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << spec.to_json().dump(2) << '\n';
}

inline BinSpec load_bins(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  try {
    return BinSpec::from_json(nlohmann::json::parse(f));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

/// Builds cutpoints from an NLL sample. Values outside the [trim, 1-trim]
/// quantiles (linear interpolation between order statistics) are dropped;
/// the remaining [min, max] is split into n_bins equal-width intervals, or
/// equal-count intervals with BinMode::EqualMass.
inline BinSpec make_cutpoints(std::span<const double> nlls, std::size_t n_bins = 3,
                              double trim = 0.05, BinMode mode = BinMode::EqualWidth,
                              std::string source = {}) {
  if (nlls.size() < 10)
    throw Error("need at least 10 NLL values to build bins, got " + std::to_string(nlls.size()));
  if (!(trim >= 0.0 && trim < 0.5)) throw Error("trim fraction must be in [0, 0.5)");
  if (n_bins < 1) throw Error("need at least one bin");
  std::vector<double> sorted(nlls.begin(), nlls.end());
  for (double v : sorted)
    if (!std::isfinite(v)) throw Error("NLL sample contains a non-finite value");
  std::sort(sorted.begin(), sorted.end());

  const double q_lo = quantile_sorted(sorted, trim);
  const double q_hi = quantile_sorted(sorted, 1.0 - trim);
  std::vector<double> kept;
  for (double v : sorted)
    if (v >= q_lo && v <= q_hi) kept.push_back(v);
  if (kept.empty() || !(kept.back() > kept.front()))
    throw Error("NLL sample has zero range after trimming; cannot build bins");
  const double lo = kept.front(), hi = kept.back();

  std::vector<double> cuts(n_bins + 1);
  cuts.front() = lo;
  cuts.back() = hi;
  for (std::size_t i = 1; i < n_bins; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(n_bins);
    cuts[i] = mode == BinMode::EqualWidth ? lo + (hi - lo) * frac : quantile_sorted(kept, frac);
  }
  return BinSpec(std::move(cuts), BinSpec::default_labels(n_bins), trim, mode, std::move(source));
}

struct BinProportions {
  std::string partition;
  std::vector<std::string> labels;
  std::vector<double> fractions;  // per label; OUT excluded
  double total = 0.0;             // sum of fractions, <= 1
  std::size_t n_utterances = 0;
};

inline BinProportions proportions(const BinSpec& spec, const Partition& part) {
  std::vector<std::string> missing;
  for (const auto& u : part.utterances())
    if (!u.nll) missing.push_back(u.id);
  if (!missing.empty()) {
    std::string msg = "utterances without NLL in " + part.name() + ":";
    for (const auto& id : missing) msg += " " + id;
    throw Error(msg);
  }
  if (part.empty()) throw Error("partition " + part.name() + " is empty");
  std::vector<std::size_t> counts(spec.n_bins(), 0);
  for (const auto& u : part.utterances())
    if (auto i = spec.index(*u.nll)) ++counts[*i];
  BinProportions out;
  out.partition = part.name();
  out.labels = spec.labels();
  out.n_utterances = part.size();
  std::size_t inside = 0;
  for (std::size_t c : counts) {
    out.fractions.push_back(static_cast<double>(c) / static_cast<double>(part.size()));
    inside += c;
  }
  out.total = static_cast<double>(inside) / static_cast<double>(part.size());
  return out;
}

}  // namespace kboost
