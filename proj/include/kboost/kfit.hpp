// include/kboost/kfit.hpp

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

// Context exponent estimation.
//
// The isolated condition (reference bin) and a context condition are related
// through their error rates as
//
//   e_c = e_i ^ k,   equivalently   p_c = 1 - (1 - p_i) ^ k.
//
// k is fit by least squares in probability space over paired (e_i, e_c)
// measurements taken at several SNRs. Confidence intervals come from a Wild
// bootstrap over the log-space residuals: each replicate multiplies every
// residual by an independent standard normal draw, rebuilds e_c, and refits.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "kboost/common.hpp"
#include "kboost/parallel.hpp"
#include "kboost/rng.hpp"
#include "kboost/scoring.hpp"

namespace kboost {

struct PairedPoint {
  Snr snr;
  double e_i = 0.0;  // reference (isolated) bin
  double e_c = 0.0;  // context bin
};

struct ExcludedPoint {
  Snr snr;
  std::string reason;
};

/// Rates within this distance of 0 or 1 are treated as boundary values.
inline constexpr double kBoundaryEps = 1e-6;

struct UsablePoints {
  std::vector<PairedPoint> points;
  std::vector<ExcludedPoint> excluded;
};

/// Drops points where e_i is at a boundary (ln e_i undefined or
/// uninformative) or e_c is outside (0, 1]. e_c = 1 is kept.
inline UsablePoints filter_usable(std::span<const PairedPoint> points) {
  UsablePoints out;
  for (const auto& p : points) {
    if (!std::isfinite(p.e_i) || !std::isfinite(p.e_c))
      out.excluded.push_back({p.snr, "non-finite rate"});
    else if (p.e_i <= kBoundaryEps)
      out.excluded.push_back({p.snr, "e_i at 0"});
    else if (p.e_i >= 1.0 - kBoundaryEps)
      out.excluded.push_back({p.snr, "e_i at 1"});
    else if (p.e_c <= 0.0)
      out.excluded.push_back({p.snr, "e_c = 0"});
    else if (p.e_c > 1.0)
      out.excluded.push_back({p.snr, "e_c > 1"});
    else
      out.points.push_back(p);
  }
  return out;
}

struct KSearch {
  double lo = 0.1;
  double hi = 20.0;
  double wide_hi = 1000.0;  // retried when the minimum sits at `hi`
  std::size_t scan_points = 64;
  std::size_t min_points = 2;
  bool require_distinct_e_i = true;
};

struct KSolution {
  double k = 0.0;
  std::size_t n_points = 0;
  std::vector<ExcludedPoint> excluded;
  bool widened = false;   // search range extended to wide_hi
  bool at_bound = false;  // minimum lies on the edge of the search range
  bool unimodal = true;   // scan found a single interior minimum
};

namespace detail {

/// Half the derivative of sum (e_i^k - e_c)^2 with respect to k.
inline double nls_slope(std::span<const double> log_ei, std::span<const double> ec, double k) {
  double g = 0.0;
  for (std::size_t j = 0; j < ec.size(); ++j) {
    const double m = std::exp(k * log_ei[j]);
    g += (m - ec[j]) * m * log_ei[j];
  }
  return g;
}

inline double nls_objective(std::span<const double> log_ei, std::span<const double> ec, double k) {
  double f = 0.0;
  for (std::size_t j = 0; j < ec.size(); ++j) {
    const double r = std::exp(k * log_ei[j]) - ec[j];
    f += r * r;
  }
  return f;
}

struct Bracket {
  double lo, hi;
  bool interior;
};

/// Scans the slope on a log-spaced grid. Returns every bracket where it turns
/// from negative to non-negative (a local minimum), or the range edge when
/// the objective is monotone over the range.
inline std::vector<Bracket> scan_minima(std::span<const double> log_ei, std::span<const double> ec,
                                        double lo, double hi, std::size_t n) {
  std::vector<double> ks(n), gs(n);
  const double step = std::log(hi / lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    ks[i] = i + 1 == n ? hi : lo * std::exp(step * static_cast<double>(i));
    gs[i] = nls_slope(log_ei, ec, ks[i]);
  }
  std::vector<Bracket> out;
  if (gs[0] >= 0.0) out.push_back({lo, lo, false});
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (gs[i] < 0.0 && gs[i + 1] >= 0.0) out.push_back({ks[i], ks[i + 1], true});
  if (gs[n - 1] < 0.0) out.push_back({hi, hi, false});
  return out;
}

/// Bisection on the slope down to adjacent doubles.
inline double refine_root(std::span<const double> log_ei, std::span<const double> ec, double lo,
                          double hi) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    const double g = nls_slope(log_ei, ec, mid);
    if (g == 0.0) return mid;
    (g < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// NLS fit on points that are already usable.
inline KSolution solve_k(std::span<const double> log_ei, std::span<const double> ec,
                         const KSearch& search) {
  KSolution sol;
  sol.n_points = ec.size();
  double hi = search.hi;
  auto brackets = scan_minima(log_ei, ec, search.lo, hi, search.scan_points);
  if (brackets.size() == 1 && !brackets[0].interior && brackets[0].lo == hi) {
    sol.widened = true;
    hi = search.wide_hi;
    brackets = scan_minima(log_ei, ec, search.lo, hi, search.scan_points);
  }
  sol.unimodal = brackets.size() == 1;
  double best_k = 0.0, best_f = std::numeric_limits<double>::infinity();
  bool best_interior = false;
  for (const auto& b : brackets) {
    const double k = b.interior ? refine_root(log_ei, ec, b.lo, b.hi) : b.lo;
    const double f = nls_objective(log_ei, ec, k);
    if (f < best_f) {
      best_f = f;
      best_k = k;
      best_interior = b.interior;
    }
  }
  sol.k = best_k;
  sol.at_bound = !best_interior;
  return sol;
}

inline void unpack(std::span<const PairedPoint> pts, std::vector<double>& log_ei,
                   std::vector<double>& ec) {
  log_ei.resize(pts.size());
  ec.resize(pts.size());
  for (std::size_t j = 0; j < pts.size(); ++j) {
    log_ei[j] = std::log(pts[j].e_i);
    ec[j] = pts[j].e_c;
  }
}

inline UsablePoints checked_usable(std::span<const PairedPoint> points, const KSearch& search) {
  UsablePoints use = filter_usable(points);
  if (use.points.size() < search.min_points) {
    std::string msg = "need at least " + std::to_string(search.min_points) +
                      " usable points to fit k, have " + std::to_string(use.points.size());
    if (!use.excluded.empty()) {
      msg += " (excluded:";
      for (const auto& x : use.excluded) msg += " " + x.snr.str() + "=" + x.reason;
      msg += ")";
    }
    throw Error(msg);
  }
  if (search.require_distinct_e_i && use.points.size() >= 2) {
    bool distinct = false;
    for (const auto& p : use.points) distinct |= p.e_i != use.points.front().e_i;
    if (!distinct) throw Error("all usable points share the same e_i; k is not identifiable");
  }
  return use;
}

}  // namespace detail

/// k = argmin sum (e_i^k - e_c)^2 over the usable points, with exclusions
/// and search diagnostics.
inline KSolution fit_k_detailed(std::span<const PairedPoint> points, const KSearch& search = {}) {
  const UsablePoints use = detail::checked_usable(points, search);
  std::vector<double> log_ei, ec;
  detail::unpack(use.points, log_ei, ec);
  KSolution sol = detail::solve_k(log_ei, ec, search);
  sol.excluded = use.excluded;
  return sol;
}

inline double fit_k(std::span<const PairedPoint> points, const KSearch& search = {}) {
  return fit_k_detailed(points, search).k;
}

/// Ordinary least squares through the origin on ln e_c = k ln e_i. Kept for
/// comparison; it weights small e_c heavily.
inline double fit_k_log_ols(std::span<const PairedPoint> points, const KSearch& search = {}) {
  const UsablePoints use = detail::checked_usable(points, search);
  double sxy = 0.0, sxx = 0.0;
  for (const auto& p : use.points) {
    const double x = std::log(p.e_i), y = std::log(p.e_c);
    sxy += x * y;
    sxx += x * x;
  }
  return sxy / sxx;
}

struct BootstrapOptions {
  std::size_t n_boot = 9999;
  std::uint64_t seed = 0;
  double level = 0.95;
  unsigned threads = 1;  // 0 = hardware concurrency
  bool keep_replicates = false;
};

struct BootstrapResult {
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<double> replicates;  // sorted; only when requested
};

/// Log-space residuals below this (relative to |ln e_c|) are rounding noise.
inline constexpr double kResidualFloor = 1e-12;

/// Wild bootstrap percentile interval for k. Replicate b draws its normals
/// from a stream keyed by (seed, b), so the result does not depend on thread
/// count or scheduling. Synthetic e_c are clamped to at most 1.
inline BootstrapResult wild_bootstrap(std::span<const PairedPoint> points, double k_hat,
                                      const BootstrapOptions& opts = {},
                                      const KSearch& search = {}) {
  if (opts.n_boot < 100) throw Error("bootstrap needs at least 100 replicates");
  if (!(opts.level > 0.0 && opts.level < 1.0)) throw Error("confidence level must be in (0,1)");
  if (!(k_hat > 0.0) || !std::isfinite(k_hat)) throw Error("k_hat must be positive");
  const UsablePoints use = detail::checked_usable(points, search);
  const std::size_t n = use.points.size();
  std::vector<double> log_ei, ec;
  detail::unpack(use.points, log_ei, ec);
  std::vector<double> resid(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double log_ec = std::log(ec[j]);
    resid[j] = log_ec - k_hat * log_ei[j];
    if (std::abs(resid[j]) <= kResidualFloor * std::max(1.0, std::abs(log_ec))) resid[j] = 0.0;
  }

  KSearch refit = search;
  refit.min_points = 1;
  refit.require_distinct_e_i = false;
  std::vector<double> reps(opts.n_boot);
  parallel_for(opts.n_boot, opts.threads, [&](std::size_t b) {
    CounterRng rng(derive_key(opts.seed, {0x6b626f6f74ULL, b}));
    std::vector<double> syn(n);
    bool perturbed = false;
    for (std::size_t j = 0; j < n; ++j) {
      const double eps = resid[j] * rng.normal();
      perturbed |= eps != 0.0;
      syn[j] = std::min(1.0, std::exp(k_hat * log_ei[j] + eps));
    }
    // An unperturbed replicate reproduces the fitted curve, whose minimizer
    // is k_hat itself.
    reps[b] = perturbed ? detail::solve_k(log_ei, syn, refit).k : k_hat;
  });
  std::stable_sort(reps.begin(), reps.end());
  BootstrapResult out;
  const double tail = (1.0 - opts.level) / 2.0;
  out.ci_low = quantile_sorted(reps, tail);
  out.ci_high = quantile_sorted(reps, 1.0 - tail);
  if (opts.keep_replicates) out.replicates = std::move(reps);
  return out;
}

/// k from a single pair: ln e_c / ln e_i.
inline double pointwise_k(double e_i, double e_c) {
  if (!(e_i > 0.0 && e_i < 1.0) || !(e_c > 0.0 && e_c < 1.0))
    throw Error("point-wise k needs 0 < e_i < 1 and 0 < e_c < 1");
  return std::log(e_c) / std::log(e_i);
}

/// p_c = 1 - (1 - p_i)^k.
inline double context_accuracy(double p_i, double k) {
  if (!(p_i >= 0.0 && p_i <= 1.0)) throw Error("accuracy must be in [0,1]");
  if (!(k > 0.0)) throw Error("k must be positive");
  return 1.0 - std::pow(1.0 - p_i, k);
}

enum class FitMethod { Nls, LogOls };

inline std::string to_string(FitMethod m) { return m == FitMethod::Nls ? "nls" : "log-ols"; }

/// A complete fit for one (system, partition, context bin).
struct KFit {
  std::string system;
  std::string partition;
  std::string context_bin;
  std::string reference_bin;
  FitMethod method = FitMethod::Nls;
  double k = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_points = 0;
  std::size_t n_boot = 0;
  std::uint64_t seed = 0;
  std::vector<ExcludedPoint> excluded;
  std::vector<PairedPoint> points;  // every paired point, usable or not
  bool widened = false;
  bool at_bound = false;
  std::string bin_hash;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["system"] = system;
    j["partition"] = partition;
    j["context_bin"] = context_bin;
    j["k"] = k;
    j["ci_low"] = ci_low;
    j["ci_high"] = ci_high;
    j["n_points"] = n_points;
    j["n_boot"] = n_boot;
    j["seed"] = seed;
    auto ex = nlohmann::ordered_json::array();
    for (const auto& x : excluded) ex.push_back({{"snr", x.snr.str()}, {"reason", x.reason}});
    j["excluded_points"] = ex;
    j["reference_bin"] = reference_bin;
    j["method"] = to_string(method);
    j["search_widened"] = widened;
    j["at_search_bound"] = at_bound;
    if (!bin_hash.empty()) j["bin_hash"] = bin_hash;
    auto pts = nlohmann::ordered_json::array();
    for (const auto& p : points) pts.push_back({{"snr", p.snr.str()}, {"e_i", p.e_i}, {"e_c", p.e_c}});
    j["points"] = pts;
    return j;
  }

  /// Inverse of to_json(). Null interval bounds read back as NaN.
  static KFit from_json(const nlohmann::json& j) {
    const auto num = [](const nlohmann::json& v) {
      return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    try {
      KFit f;
      f.system = j.at("system").get<std::string>();
      f.partition = j.at("partition").get<std::string>();
      f.context_bin = j.at("context_bin").get<std::string>();
      f.reference_bin = j.at("reference_bin").get<std::string>();
      const auto method = j.at("method").get<std::string>();
      if (method == "nls") f.method = FitMethod::Nls;
      else if (method == "log-ols") f.method = FitMethod::LogOls;
      else throw Error("unknown fit method '" + method + "'");
      f.k = num(j.at("k"));
      f.ci_low = num(j.at("ci_low"));
      f.ci_high = num(j.at("ci_high"));
      f.n_points = j.at("n_points").get<std::size_t>();
      f.n_boot = j.at("n_boot").get<std::size_t>();
      f.seed = j.at("seed").get<std::uint64_t>();
      for (const auto& x : j.at("excluded_points"))
        f.excluded.push_back({Snr::parse(x.at("snr").get<std::string>()), x.at("reason").get<std::string>()});
      f.widened = j.value("search_widened", false);
      f.at_bound = j.value("at_search_bound", false);
      f.bin_hash = j.value("bin_hash", std::string());
      if (j.contains("points"))
        for (const auto& p : j.at("points"))
          f.points.push_back({Snr::parse(p.at("snr").get<std::string>()), p.at("e_i").get<double>(),
                              p.at("e_c").get<double>()});
      return f;
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string("malformed fit record: ") + e.what());
    }
  }
};

struct FitKOptions {
  FitMethod method = FitMethod::Nls;
  BootstrapOptions bootstrap;
  KSearch search;
};

/// Point estimate plus bootstrap interval. The bootstrap always refits by
/// NLS around the chosen point estimate.
inline KFit estimate_k(std::span<const PairedPoint> points, const FitKOptions& opts = {}) {
  KFit fit;
  fit.method = opts.method;
  fit.points.assign(points.begin(), points.end());
  if (opts.method == FitMethod::Nls) {
    const KSolution sol = fit_k_detailed(points, opts.search);
    fit.k = sol.k;
    fit.widened = sol.widened;
    fit.at_bound = sol.at_bound;
  } else {
    fit.k = fit_k_log_ols(points, opts.search);
  }
  const UsablePoints use = filter_usable(points);
  fit.n_points = use.points.size();
  fit.excluded = use.excluded;
  const BootstrapResult ci = wild_bootstrap(points, fit.k, opts.bootstrap, opts.search);
  fit.ci_low = ci.ci_low;
  fit.ci_high = ci.ci_high;
  fit.n_boot = opts.bootstrap.n_boot;
  fit.seed = opts.bootstrap.seed;
  return fit;
}

/// Pairs the reference-bin and context-bin cells of one (system, partition)
/// by SNR. SNRs present in only one of the two bins are skipped.
inline std::vector<PairedPoint> pair_points(std::span<const ErrorRatePoint> cells,
                                            const std::string& system,
                                            const std::string& partition,
                                            const std::string& context_bin,
                                            const std::string& reference_bin) {
  std::map<Snr, double> ref, ctx;
  for (const auto& c : cells) {
    if (c.system != system || c.partition != partition) continue;
    if (c.bin == reference_bin) ref[c.snr] = c.e;
    if (c.bin == context_bin) ctx[c.snr] = c.e;
  }
  std::vector<PairedPoint> out;
  for (const auto& [snr, e_i] : ref)
    if (auto it = ctx.find(snr); it != ctx.end()) out.push_back({snr, e_i, it->second});
  return out;
}

// Klakow baseline ------------------------------------------------------------

/// e = b * exp(a * H).
struct KlakowFit {
  double a = 0.0;
  double b = 0.0;
  std::size_t n_used = 0;
  std::size_t n_excluded = 0;  // points with e = 0 (or outside (0,1])
};

struct NllRatePoint {
  double nll = 0.0;
  double e = 0.0;
};

/// OLS on ln e = ln b + a H.
inline KlakowFit fit_klakow(std::span<const NllRatePoint> points) {
  KlakowFit fit;
  double sx = 0, sy = 0;
  std::vector<double> hs;
  for (const auto& p : points) {
    if (!std::isfinite(p.nll) || !(p.e > 0.0 && p.e <= 1.0)) {
      ++fit.n_excluded;
      continue;
    }
    const double y = std::log(p.e);
    sx += p.nll;
    sy += y;
    hs.push_back(p.nll);
    ++fit.n_used;
  }
  if (fit.n_used < 2)
    throw Error("Klakow fit needs at least 2 points with 0 < e <= 1, have " +
                std::to_string(fit.n_used));
  if (std::all_of(hs.begin(), hs.end(), [&](double h) { return h == hs.front(); }))
    throw Error("Klakow fit needs at least two distinct NLL values");
  const double n = static_cast<double>(fit.n_used);
  const double mx = sx / n, my = sy / n;
  // Centered sums for conditioning.
  double cxx = 0, cxy = 0;
  for (const auto& p : points) {
    if (!std::isfinite(p.nll) || !(p.e > 0.0 && p.e <= 1.0)) continue;
    const double dx = p.nll - mx;
    cxx += dx * dx;
    cxy += dx * (std::log(p.e) - my);
  }
  fit.a = cxy / cxx;
  fit.b = std::exp(my - fit.a * mx);
  return fit;
}

/// Mean NLL of the utterances in each bin; empty bins are absent.
inline std::map<std::string, double> bin_mean_nll(const BinSpec& spec, const Partition& part) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& u : part.utterances()) {
    if (!u.nll) throw Error("utterance " + u.id + " in " + part.name() + " has no NLL");
    const auto label = spec.assign(*u.nll);
    if (label == kOutLabel) continue;
    auto& [sum, n] = acc[std::string(label)];
    sum += *u.nll;
    ++n;
  }
  std::map<std::string, double> out;
  for (const auto& [label, v] : acc) out[label] = v.first / static_cast<double>(v.second);
  return out;
}

struct KlakowRow {
  std::string system;
  std::string partition;
  Snr snr;
  std::vector<NllRatePoint> points;
  std::optional<KlakowFit> fit;
  std::string skipped;  // reason when fit is empty

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["system"] = system;
    j["partition"] = partition;
    j["snr"] = snr.str();
    if (fit) {
      j["a"] = fit->a;
      j["b"] = fit->b;
      j["n_used"] = fit->n_used;
      j["n_excluded"] = fit->n_excluded;
    } else {
      j["skipped"] = skipped;
    }
    return j;
  }
};

/// One fit per (system, partition, SNR) over the per-bin cells, with each
/// bin placed at the mean NLL of its utterances.
inline std::vector<KlakowRow> fit_klakow_cells(std::span<const ErrorRatePoint> cells,
                                               std::span<const Partition> partitions,
                                               const BinSpec& spec) {
  std::map<std::string, std::map<std::string, double>> means;
  for (const auto& p : partitions) means[p.name()] = bin_mean_nll(spec, p);
  std::map<std::tuple<std::string, std::string, Snr>, std::vector<NllRatePoint>> groups;
  for (const auto& c : cells) {
    auto pm = means.find(c.partition);
    if (pm == means.end()) throw Error("no manifest for partition " + c.partition);
    auto it = pm->second.find(c.bin);
    if (it == pm->second.end()) continue;
    groups[{c.system, c.partition, c.snr}].push_back({it->second, c.e});
  }
  std::vector<KlakowRow> out;
  for (auto& [key, pts] : groups) {
    KlakowRow row{std::get<0>(key), std::get<1>(key), std::get<2>(key), std::move(pts), {}, {}};
    try {
      row.fit = fit_klakow(row.points);
    } catch (const Error& e) {
      row.skipped = e.what();
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace kboost
