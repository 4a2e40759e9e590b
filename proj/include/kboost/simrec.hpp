// include/kboost/simrec.hpp

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

// Simulated recognizer with a known context exponent per bin.
//
// Isolated accuracy follows a logistic psychometric curve in SNR. A word in
// bin b at SNR s is wrong with probability e_i(s)^k_b, independently of every
// other word, and a wrong word is replaced by an error token, so scoring sees
// substitutions only. Output uses the regular manifest formats, so the rest
// of the pipeline runs on it unchanged.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kboost/binning.hpp"
#include "kboost/common.hpp"
#include "kboost/corpus.hpp"
#include "kboost/noise.hpp"
#include "kboost/rng.hpp"
#include "kboost/scoring.hpp"

namespace kboost {

struct Psychometric {
  double midpoint_db = 10.0;
  double slope = 0.15;  // per dB
};

/// p_i = 1 / (1 + exp(-slope * (snr - midpoint))).
inline double isolated_accuracy(double snr, const Psychometric& psy) {
  if (!(psy.slope > 0.0)) throw Error("psychometric slope must be positive");
  return 1.0 / (1.0 + std::exp(-psy.slope * (snr - psy.midpoint_db)));
}

inline constexpr std::string_view kSimErrorToken = "<sim-err>";

struct SimConfig {
  std::map<std::string, double> k_per_bin{{"HP", 2.72}, {"LP", 1.38}, {"ZP", 1.0}};
  Psychometric psychometric;
  std::size_t words_per_utt = 20;
  std::size_t utts_per_bin = 500;
  std::size_t vocab_size = 1000;
  std::uint64_t seed = 0;
  std::string partition = "SIM";
  std::string system = "simrec";
  BinSpec bins{{3.4, 4.5, 5.6, 6.8}, {"HP", "LP", "ZP"}, 0.05, BinMode::EqualWidth, "simrec"};

  void validate() const {
    if (!(psychometric.slope > 0.0)) throw Error("psychometric slope must be positive");
    if (words_per_utt == 0 || utts_per_bin == 0 || vocab_size == 0)
      throw Error("simulation sizes must be positive");
    for (const auto& label : bins.labels()) {
      auto it = k_per_bin.find(label);
      if (it == k_per_bin.end()) throw Error("no k configured for bin " + label);
      if (!(it->second >= 1.0)) throw Error("k for bin " + label + " must be >= 1");
    }
    if (k_per_bin.at(bins.reference_label()) != 1.0)
      throw Error("reference bin " + bins.reference_label() + " must have k = 1");
  }

  double k(const std::string& bin) const { return k_per_bin.at(bin); }
};

/// Expected error rate for a bin at an SNR.
inline double expected_error(const SimConfig& cfg, const std::string& bin, double snr) {
  const double e_i = 1.0 - isolated_accuracy(snr, cfg.psychometric);
  return std::pow(e_i, cfg.k(bin));
}

namespace detail {

inline constexpr std::uint64_t kSimRefStream = 0x726566ULL;
inline constexpr std::uint64_t kSimHypStream = 0x687970ULL;

inline std::uint64_t snr_id(int snr) { return static_cast<std::uint64_t>(static_cast<std::int64_t>(snr)); }

inline std::string sim_utt_id(const std::string& bin, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%05zu", bin.c_str(), i);
  return buf;
}

/// Per-word error flags for one utterance at one SNR.
template <typename Fn>
void sim_error_draws(const SimConfig& cfg, std::size_t utt_index, int snr, double p_err, Fn&& fn) {
  CounterRng rng(derive_key(cfg.seed, {kSimHypStream, utt_index, snr_id(snr)}));
  for (std::size_t w = 0; w < cfg.words_per_utt; ++w) fn(w, rng.bernoulli(p_err));
}

}  // namespace detail

struct SimulatedCorpus {
  Partition reference;
  std::vector<HypothesisRecord> hypotheses;
  BinSpec bins;
};

/// Reference manifest (NLL at each bin's midpoint) and hypotheses at every
/// grid SNR. Deterministic in (config, grid).
inline SimulatedCorpus simulate(const SimConfig& cfg, const SnrGrid& grid = {}) {
  cfg.validate();
  const auto& labels = cfg.bins.labels();
  const auto& cuts = cfg.bins.cuts();
  std::vector<Utterance> utts;
  utts.reserve(labels.size() * cfg.utts_per_bin);
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const double mid = 0.5 * (cuts[b] + cuts[b + 1]);
    for (std::size_t i = 0; i < cfg.utts_per_bin; ++i) {
      const std::size_t index = b * cfg.utts_per_bin + i;
      CounterRng rng(derive_key(cfg.seed, {detail::kSimRefStream, index}));
      Utterance u;
      u.id = detail::sim_utt_id(labels[b], i);
      u.nll = mid;
      for (std::size_t w = 0; w < cfg.words_per_utt; ++w)
        u.reference.push_back("w" + std::to_string(rng.below(cfg.vocab_size)));
      utts.push_back(std::move(u));
    }
  }
  SimulatedCorpus out{Partition(cfg.partition, std::move(utts)), {}, cfg.bins};
  const auto& refs = out.reference.utterances();
  for (int snr : grid.values()) {
    for (std::size_t b = 0; b < labels.size(); ++b) {
      const double p_err = expected_error(cfg, labels[b], snr);
      for (std::size_t i = 0; i < cfg.utts_per_bin; ++i) {
        const std::size_t index = b * cfg.utts_per_bin + i;
        Tokens hyp = refs[index].reference;
        detail::sim_error_draws(cfg, index, snr, p_err, [&](std::size_t w, bool wrong) {
          if (wrong) hyp[w] = std::string(kSimErrorToken);
        });
        out.hypotheses.push_back({refs[index].id, Snr(snr), std::move(hyp)});
      }
    }
  }
  return out;
}

/// Same draws as simulate(), counted directly into per-bin cells without
/// building transcripts. Scoring simulate()'s output gives identical counts.
inline std::vector<ErrorRatePoint> simulate_cells(const SimConfig& cfg, const SnrGrid& grid = {}) {
  cfg.validate();
  const auto& labels = cfg.bins.labels();
  std::vector<ErrorRatePoint> out;
  for (int snr : grid.values()) {
    std::size_t all_errors = 0, all_words = 0;
    for (std::size_t b = 0; b < labels.size(); ++b) {
      const double p_err = expected_error(cfg, labels[b], snr);
      std::size_t errors = 0;
      for (std::size_t i = 0; i < cfg.utts_per_bin; ++i)
        detail::sim_error_draws(cfg, b * cfg.utts_per_bin + i, snr, p_err,
                                [&](std::size_t, bool wrong) { errors += wrong; });
      const std::size_t words = cfg.utts_per_bin * cfg.words_per_utt;
      out.push_back({cfg.system, cfg.partition, labels[b], Snr(snr),
                     static_cast<double>(errors) / static_cast<double>(words), words, errors, false});
      all_errors += errors;
      all_words += words;
    }
    out.push_back({cfg.system, cfg.partition, std::string(kAllLabel), Snr(snr),
                   static_cast<double>(all_errors) / static_cast<double>(all_words), all_words,
                   all_errors, false});
  }
  sort_points(out, cfg.bins);
  return out;
}

/// Attaches simulated hypotheses to the reference partition.
inline Partition with_hypotheses(const SimulatedCorpus& sim) {
  Partition p = sim.reference;
  for (const auto& h : sim.hypotheses) p.add_hypothesis(h.id, h.snr, h.text);
  return p;
}

}  // namespace kboost
