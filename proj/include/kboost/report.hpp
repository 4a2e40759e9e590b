// include/kboost/report.hpp

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

// Run report: error-rate, k and bin-occupancy tables (CSV and aligned text),
// figure data as CSV, and a provenance record.
//
// Layout written by write_report():
//   wer.csv  wer.txt  k.csv  k.txt  proportions.csv  proportions.txt
//   fig_acc_ratio.csv  fig_pointwise_k.csv  run.json

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kboost/binning.hpp"
#include "kboost/common.hpp"
#include "kboost/kfit.hpp"
#include "kboost/scoring.hpp"

namespace kboost {

/// System label for the mean of per-system k values in a partition.
inline constexpr std::string_view kAllMeanLabel = "all(mean-k)";
/// System label for a refit on error counts pooled over systems.
inline constexpr std::string_view kAllPooledLabel = "all(pooled)";

/// Seed for one fit, derived from the run seed and the fit's identity.
inline std::uint64_t fit_seed(std::uint64_t run_seed, const std::string& system,
                              const std::string& partition, const std::string& context_bin) {
  return derive_key(run_seed, {fnv1a(system), fnv1a(partition), fnv1a(context_bin)});
}

/// Cells summed over systems per (partition, bin, snr).
inline std::vector<ErrorRatePoint> pool_systems(std::span<const ErrorRatePoint> cells,
                                                const std::string& system_label) {
  std::map<std::tuple<std::string, std::string, Snr>, std::pair<std::size_t, std::size_t>> acc;
  for (const auto& c : cells) {
    auto& [errors, words] = acc[{c.partition, c.bin, c.snr}];
    errors += c.n_errors;
    words += c.n_ref_words;
  }
  std::vector<ErrorRatePoint> out;
  for (const auto& [key, v] : acc) {
    const auto& [partition, bin, snr] = key;
    const double raw = static_cast<double>(v.first) / static_cast<double>(v.second);
    out.push_back({system_label, partition, bin, snr, std::min(1.0, raw), v.second, v.first, raw > 1.0});
  }
  return out;
}

/// Fits k for every (system, partition, context bin), then the aggregate
/// rows: per partition over systems, and per system over partitions (with
/// partition "all"). Each aggregate comes as a mean of k (no interval) and
/// as a bootstrap refit on pooled counts.
inline std::vector<KFit> fit_all(std::span<const ErrorRatePoint> cells, const BinSpec& bins,
                                 const FitKOptions& opts) {
  const std::string ref = bins.reference_label();
  std::vector<std::string> contexts(bins.labels().begin(), bins.labels().end() - 1);
  std::set<std::string> systems, partitions;
  for (const auto& c : cells) {
    systems.insert(c.system);
    partitions.insert(c.partition);
  }
  const std::string hash = bins.hash();

  const auto fit_one = [&](std::span<const ErrorRatePoint> source, const std::string& system,
                           const std::string& partition, const std::string& ctx) {
    FitKOptions o = opts;
    o.bootstrap.seed = fit_seed(opts.bootstrap.seed, system, partition, ctx);
    const auto pts = pair_points(source, system, partition, ctx, ref);
    KFit f = estimate_k(pts, o);
    f.system = system;
    f.partition = partition;
    f.context_bin = ctx;
    f.reference_bin = ref;
    f.bin_hash = hash;
    return f;
  };
  const auto mean_row = [&](const std::vector<const KFit*>& members, const std::string& system,
                            const std::string& partition, const std::string& ctx) {
    KFit f;
    f.system = system;
    f.partition = partition;
    f.context_bin = ctx;
    f.reference_bin = ref;
    f.method = opts.method;
    f.bin_hash = hash;
    f.ci_low = f.ci_high = std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (const KFit* m : members) {
      s += m->k;
      f.n_points += m->n_points;
    }
    f.k = s / static_cast<double>(members.size());
    return f;
  };

  std::vector<KFit> fits;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> where;
  for (const auto& p : partitions)
    for (const auto& s : systems)
      for (const auto& ctx : contexts) {
        if (pair_points(cells, s, p, ctx, ref).empty()) continue;
        where[{s, p, ctx}] = fits.size();
        fits.push_back(fit_one(cells, s, p, ctx));
      }
  const std::size_t n_base = fits.size();

  if (systems.size() > 1) {
    for (const auto& p : partitions) {
      std::vector<ErrorRatePoint> part_cells;
      for (const auto& c : cells)
        if (c.partition == p) part_cells.push_back(c);
      const auto pooled = pool_systems(part_cells, std::string(kAllPooledLabel));
      for (const auto& ctx : contexts) {
        std::vector<const KFit*> members;
        for (const auto& s : systems)
          if (auto it = where.find({s, p, ctx}); it != where.end()) members.push_back(&fits[it->second]);
        if (members.empty()) continue;
        fits.push_back(mean_row(members, std::string(kAllMeanLabel), p, ctx));
        fits.push_back(fit_one(pooled, std::string(kAllPooledLabel), p, ctx));
      }
    }
  }
  if (partitions.size() > 1) {
    for (const auto& s : systems) {
      std::vector<ErrorRatePoint> sys_cells;
      for (const auto& c : cells)
        if (c.system == s) {
          sys_cells.push_back(c);
          sys_cells.back().partition = "all";
        }
      // Pooling over partitions happens per (bin, snr).
      auto pooled = pool_systems(sys_cells, s);
      for (const auto& ctx : contexts) {
        std::vector<const KFit*> members;
        for (std::size_t i = 0; i < n_base; ++i)
          if (fits[i].system == s && fits[i].context_bin == ctx) members.push_back(&fits[i]);
        if (members.empty()) continue;
        KFit m = mean_row(members, s, "all", ctx);
        m.system = s + "(mean-k)";
        fits.push_back(m);
        KFit f = fit_one(pooled, s, "all", ctx);
        f.system = s + "(pooled)";
        fits.push_back(f);
      }
    }
  }
  return fits;
}

// Rendering ------------------------------------------------------------------

inline std::string render_text_table(const std::vector<std::string>& header,
                                     const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::ostringstream out;
  const auto line = [&](const std::vector<std::string>& r) {
    std::string s;
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) s += "  ";
      const std::string pad(width[c] - r[c].size(), ' ');
      s += c < 2 ? r[c] + pad : pad + r[c];
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    out << s << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
  out << std::string(total, '-') << '\n';
  for (const auto& r : rows) line(r);
  return out.str();
}

/// Rate as a percentage with one decimal.
inline std::string percent(double rate) { return format_fixed(rate * 100.0, 1); }

inline std::string maybe_fixed(double v, int decimals) {
  return std::isfinite(v) ? format_fixed(v, decimals) : "-";
}
inline std::string maybe_exact(double v) { return std::isfinite(v) ? format_exact(v) : ""; }

struct ReportInputs {
  BinSpec bins;
  std::vector<ErrorRatePoint> cells;
  std::vector<KFit> fits;
  std::vector<BinProportions> proportions;
  nlohmann::ordered_json provenance = nlohmann::ordered_json::object();
};

struct RunReport {
  std::vector<ErrorRatePoint> wer_rows;
  std::vector<KFit> k_rows;
  std::vector<BinProportions> proportion_rows;
  std::map<std::string, std::string> files;  // file name -> contents
};

/// Reference curves written alongside fitted ones in fig_acc_ratio.csv.
inline const std::vector<double>& reference_curve_ks() {
  static const std::vector<double> ks{1.0, 1.38, 2.72, 500.0};
  return ks;
}

inline RunReport build_report(const ReportInputs& in) {
  const std::string hash = in.bins.hash();
  for (const auto& f : in.fits)
    if (!f.bin_hash.empty() && f.bin_hash != hash)
      throw Error("fit for " + f.system + "/" + f.partition + "/" + f.context_bin +
                  " was made with a different bin spec (" + f.bin_hash + " vs " + hash + ")");
  RunReport rep;
  rep.wer_rows = in.cells;
  sort_points(rep.wer_rows, in.bins);
  rep.proportion_rows = in.proportions;
  std::stable_sort(rep.proportion_rows.begin(), rep.proportion_rows.end(),
                   [](const auto& a, const auto& b) { return a.partition < b.partition; });
  rep.k_rows = in.fits;
  const auto fit_rank = [](const KFit& f) {
    const bool agg = f.system.find('(') != std::string::npos;
    return std::make_tuple(f.partition == "all", f.partition, agg, f.system, f.context_bin);
  };
  std::stable_sort(rep.k_rows.begin(), rep.k_rows.end(),
                   [&](const KFit& a, const KFit& b) { return fit_rank(a) < fit_rank(b); });

  // wer
  {
    std::ostringstream csv;
    csv << "partition,bin,system,snr,wer_percent,e,n_ref_words,clamped\n";
    for (const auto& p : rep.wer_rows)
      csv << p.partition << ',' << p.bin << ',' << p.system << ',' << p.snr.str() << ','
          << percent(p.e) << ',' << format_exact(p.e) << ',' << p.n_ref_words << ','
          << (p.clamped ? 1 : 0) << '\n';
    rep.files["wer.csv"] = csv.str();

    std::set<Snr> snrs;
    std::set<std::string> systems;
    for (const auto& p : rep.wer_rows) {
      snrs.insert(p.snr);
      systems.insert(p.system);
    }
    std::ostringstream txt;
    txt << "Word error rates (%); '*' marks cells clamped at 100\n";
    for (const Snr& s : snrs) {
      txt << "\nSNR " << s.str() << "\n";
      std::vector<std::string> header{"partition", "bin"};
      header.insert(header.end(), systems.begin(), systems.end());
      std::map<std::pair<std::string, std::string>, std::map<std::string, std::string>> grid;
      std::vector<std::pair<std::string, std::string>> order;
      for (const auto& p : rep.wer_rows) {
        if (p.snr != s) continue;
        const auto key = std::make_pair(p.partition, p.bin);
        if (!grid.count(key)) order.push_back(key);
        grid[key][p.system] = percent(p.e) + (p.clamped ? "*" : "");
      }
      std::vector<std::vector<std::string>> rows;
      for (const auto& key : order) {
        std::vector<std::string> r{key.first, key.second};
        for (const auto& sys : systems) {
          auto it = grid[key].find(sys);
          r.push_back(it == grid[key].end() ? "-" : it->second);
        }
        rows.push_back(std::move(r));
      }
      txt << render_text_table(header, rows);
    }
    rep.files["wer.txt"] = txt.str();
  }

  // k
  {
    std::ostringstream csv;
    csv << "partition,system,context_bin,method,k,ci_low,ci_high,n_points,n_boot,excluded_points\n";
    for (const auto& f : rep.k_rows)
      csv << f.partition << ',' << f.system << ',' << f.context_bin << ',' << to_string(f.method)
          << ',' << format_exact(f.k) << ',' << maybe_exact(f.ci_low) << ','
          << maybe_exact(f.ci_high) << ',' << f.n_points << ',' << f.n_boot << ','
          << f.excluded.size() << '\n';
    rep.files["k.csv"] = csv.str();

    std::vector<std::string> contexts(in.bins.labels().begin(), in.bins.labels().end() - 1);
    std::vector<std::string> header{"partition", "system"};
    for (const auto& c : contexts) {
      header.push_back(c + " k");
      header.push_back(c + " CI");
    }
    std::map<std::pair<std::string, std::string>, std::map<std::string, const KFit*>> grid;
    std::vector<std::pair<std::string, std::string>> order;
    for (const auto& f : rep.k_rows) {
      const auto key = std::make_pair(f.partition, f.system);
      if (!grid.count(key)) order.push_back(key);
      grid[key][f.context_bin] = &f;
    }
    std::vector<std::vector<std::string>> rows;
    for (const auto& key : order) {
      std::vector<std::string> r{key.first, key.second};
      for (const auto& c : contexts) {
        auto it = grid[key].find(c);
        if (it == grid[key].end()) {
          r.insert(r.end(), {"-", "-"});
          continue;
        }
        const KFit& f = *it->second;
        r.push_back(format_fixed(f.k, 2) + (f.at_bound ? "!" : ""));
        r.push_back(std::isfinite(f.ci_low)
                        ? "[" + format_fixed(f.ci_low, 2) + ", " + format_fixed(f.ci_high, 2) + "]"
                        : "-");
      }
      rows.push_back(std::move(r));
    }
    std::ostringstream txt;
    txt << "Context exponent k with " << (rep.k_rows.empty() ? 0 : rep.k_rows.front().n_boot)
        << "-replicate Wild bootstrap 95% CIs (reference bin " << in.bins.reference_label()
        << "); '!' marks fits at the search bound\n\n";
    txt << render_text_table(header, rows);
    rep.files["k.txt"] = txt.str();
  }

  // proportions
  {
    const auto& labels = in.bins.labels();
    std::ostringstream csv;
    csv << "partition";
    for (const auto& l : labels) csv << ',' << l;
    csv << ",total,n_utterances\n";
    std::vector<std::string> header{"partition"};
    header.insert(header.end(), labels.begin(), labels.end());
    header.push_back("total");
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : rep.proportion_rows) {
      csv << p.partition;
      std::vector<std::string> r{p.partition};
      for (double f : p.fractions) {
        csv << ',' << percent(f);
        r.push_back(percent(f));
      }
      csv << ',' << percent(p.total) << ',' << p.n_utterances << '\n';
      r.push_back(percent(p.total));
      rows.push_back(std::move(r));
    }
    rep.files["proportions.csv"] = csv.str();
    rep.files["proportions.txt"] =
        "Proportion of partition captured by each NLL bin (%)\n\n" + render_text_table(header, rows);
  }

  // figure data
  {
    std::vector<double> ks = reference_curve_ks();
    for (const auto& f : rep.k_rows)
      if (std::isfinite(f.k) && f.k > 0.0) ks.push_back(f.k);
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    std::ostringstream acc;
    acc << "p_i,p_c,k\n";
    for (double k : ks)
      for (int i = 0; i <= 100; ++i) {
        const double p_i = i / 100.0;
        acc << format_exact(p_i) << ',' << format_exact(context_accuracy(p_i, k)) << ','
            << format_exact(k) << '\n';
      }
    rep.files["fig_acc_ratio.csv"] = acc.str();

    std::ostringstream pw;
    pw << "system,partition,context_bin,snr,e_i,e_c,k_pointwise\n";
    for (const auto& f : rep.k_rows)
      for (const auto& p : f.points) {
        if (!(p.e_i > 0.0 && p.e_i < 1.0 && p.e_c > 0.0 && p.e_c < 1.0)) continue;
        pw << f.system << ',' << f.partition << ',' << f.context_bin << ',' << p.snr.str() << ','
           << format_exact(p.e_i) << ',' << format_exact(p.e_c) << ','
           << format_exact(pointwise_k(p.e_i, p.e_c)) << '\n';
      }
    rep.files["fig_pointwise_k.csv"] = pw.str();
  }

  // provenance
  {
    nlohmann::ordered_json run;
    run["tool"] = "kboost";
    run["version"] = kVersion;
    run["bin_hash"] = hash;
    run["bins"] = in.bins.to_json();
    run["inputs"] = in.provenance;
    auto fits = nlohmann::ordered_json::array();
    for (const auto& f : rep.k_rows) fits.push_back(f.to_json());
    run["fits"] = fits;
    rep.files["run.json"] = run.dump(2) + "\n";
  }
  return rep;
}

inline void write_report(const RunReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : rep.files) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (dir / name).string());
    f << content;
  }
}

}  // namespace kboost
