// include/kboost/quickk.hpp

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

// Three-step context estimate: split a partition at its NLL median, find the
// SNR where the high-NLL half is closest to a target error rate, and take the
// point-wise k there.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "kboost/binning.hpp"
#include "kboost/common.hpp"
#include "kboost/corpus.hpp"
#include "kboost/kfit.hpp"
#include "kboost/scoring.hpp"

namespace kboost {

inline constexpr std::string_view kLowNllLabel = "low-nll";
inline constexpr std::string_view kHighNllLabel = "high-nll";

struct QuickKOptions {
  double target_error = 0.5;
  double tolerance = 0.15;
  unsigned threads = 0;
};

struct QuickKResult {
  double k = 0.0;
  Snr snr;
  double e_high = 0.0;  // high-NLL half, the isolated condition
  double e_low = 0.0;   // low-NLL half, the context condition
  double median_nll = 0.0;
  std::size_t n_low = 0;
  std::size_t n_high = 0;
};

/// Median split as a two-bin spec: (min - 1, median] and (median, max].
inline BinSpec median_split(const Partition& part) {
  std::vector<double> nlls;
  for (const auto& u : part.utterances()) {
    if (!u.nll) throw Error("utterance " + u.id + " has no NLL");
    nlls.push_back(*u.nll);
  }
  if (nlls.size() < 2) throw Error("median split needs at least two utterances");
  std::sort(nlls.begin(), nlls.end());
  const double median = quantile_sorted(nlls, 0.5);
  if (!(median < nlls.back()))
    throw Error("median split is degenerate: no utterance has NLL above the median " +
                format_exact(median));
  return BinSpec({nlls.front() - 1.0, median, nlls.back()},
                 {std::string(kLowNllLabel), std::string(kHighNllLabel)}, 0.0, BinMode::EqualWidth,
                 part.name());
}

inline QuickKResult quick_k(const Partition& part, const QuickKOptions& opts = {}) {
  if (!(opts.target_error > 0.0 && opts.target_error < 1.0))
    throw Error("target error must lie in (0, 1)");
  const BinSpec split = median_split(part);
  const auto cells = score_cells(part, split, "quick-k", opts.threads);

  QuickKResult best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (const auto& c : cells) {
    if (c.bin != kHighNllLabel) continue;
    const double gap = std::abs(c.e - opts.target_error);
    if (gap < best_gap) {
      best_gap = gap;
      best.snr = c.snr;
      best.e_high = c.e;
    }
  }
  if (!(best_gap <= opts.tolerance))
    throw Error("no SNR brings the high-NLL error rate within " + format_exact(opts.tolerance) +
                " of " + format_exact(opts.target_error) + " (closest " + format_fixed(best.e_high, 3) +
                " at " + best.snr.str() + "); try a wider SNR grid");
  for (const auto& c : cells)
    if (c.bin == kLowNllLabel && c.snr == best.snr) best.e_low = c.e;
  if (!(best.e_low > 0.0 && best.e_low < 1.0))
    throw Error("low-NLL error rate at " + best.snr.str() + " is " + format_exact(best.e_low) +
                "; point-wise k is undefined");
  best.k = pointwise_k(best.e_high, best.e_low);
  best.median_nll = split.cuts()[1];
  for (const auto& u : part.utterances()) (*u.nll <= best.median_nll ? best.n_low : best.n_high)++;
  return best;
}

}  // namespace kboost
