// tests/acceptance.cpp

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

// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "edit_oracle.hpp"
#include "kboost/kboost.hpp"
#include "kn_oracle.hpp"

using namespace kboost;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = KBOOST_FIXTURES;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) { return format_fixed(v, digits); }

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("kboost_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// 1 -------------------------------------------------------------------------

Outcome oracle_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  SimConfig cfg;
  cfg.k_per_bin = {{"HP", 2.72}, {"LP", 1.38}, {"ZP", 1.0}};
  cfg.seed = 1;
  const auto sim = simulate(cfg, SnrGrid());
  const Partition part = with_hypotheses(sim);
  const auto cells = score_cells(part, sim.bins, cfg.system, 1);
  FitKOptions opts;
  opts.bootstrap.threads = 1;
  opts.bootstrap.seed = 1;
  Outcome out;
  for (const std::string bin : {"HP", "LP"}) {
    const auto pts = pair_points(cells, cfg.system, cfg.partition, bin, "ZP");
    const KFit fit = estimate_k(pts, opts);
    const double truth = cfg.k(bin);
    out.pass &= pts.size() == 9 && std::abs(fit.k - truth) <= 0.15;
    out.detail += bin + " k=" + fmt(fit.k) + " (true " + fmt(truth, 2) + ", ci [" + fmt(fit.ci_low) +
                  ", " + fmt(fit.ci_high) + "]) ";
  }
  const double secs = seconds_since(t0);
  out.pass &= secs < 30.0;
  out.detail += fmt(secs, 2) + " s single-threaded";
  return out;
}

// 2 -------------------------------------------------------------------------

Outcome bootstrap_coverage() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr int kRuns = 200;
  constexpr double kTrue = 1.5;
  int covered = 0;
  for (int r = 0; r < kRuns; ++r) {
    SimConfig cfg;
    cfg.k_per_bin = {{"HP", kTrue}, {"LP", 1.2}, {"ZP", 1.0}};
    cfg.utts_per_bin = 100;
    cfg.seed = 5000 + static_cast<std::uint64_t>(r);
    const auto cells = simulate_cells(cfg, SnrGrid());
    const auto pts = pair_points(cells, cfg.system, cfg.partition, "HP", "ZP");
    FitKOptions opts;
    opts.bootstrap.n_boot = 999;
    opts.bootstrap.seed = cfg.seed;
    opts.bootstrap.threads = 0;
    const KFit fit = estimate_k(pts, opts);
    covered += fit.ci_low <= kTrue && kTrue <= fit.ci_high;
  }
  const double secs = seconds_since(t0);
  const double rate = static_cast<double>(covered) / kRuns;
  return {rate >= 0.90 && secs < 600.0,
          std::to_string(covered) + "/" + std::to_string(kRuns) + " intervals cover k=1.5 (" +
              fmt(100 * rate, 1) + "%), " + fmt(secs, 1) + " s"};
}

// 3 -------------------------------------------------------------------------

Outcome degenerate_exactness() {
  Outcome out;
  const std::vector<double> e_i{0.9, 0.75, 0.6, 0.45, 0.3, 0.2, 0.1, 0.05};
  for (double k : {0.5, 1.0, 2.0, 5.0}) {
    std::vector<PairedPoint> pts;
    for (std::size_t j = 0; j < e_i.size(); ++j)
      pts.push_back({Snr(static_cast<int>(5 * j)), e_i[j], std::pow(e_i[j], k)});
    FitKOptions opts;
    opts.bootstrap.n_boot = 999;
    opts.bootstrap.seed = 3;
    opts.bootstrap.threads = 0;
    const KFit fit = estimate_k(pts, opts);
    const double width = fit.ci_high - fit.ci_low;
    out.pass &= std::abs(fit.k - k) <= 1e-8 && width == 0.0;
    std::ostringstream s;
    s << "k=" << k << ": err " << std::abs(fit.k - k) << " width " << width << "; ";
    out.detail += s.str();
  }
  return out;
}

// 4 -------------------------------------------------------------------------

Outcome pointwise_replay() {
  const double k = pointwise_k(0.162, 0.084);
  return {std::abs(k - 1.361) <= 0.001, "pointwise_k(0.162, 0.084) = " + fmt(k, 6)};
}

// 5 -------------------------------------------------------------------------

Outcome curve_check() {
  const double half = context_accuracy(0.5, 2.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double p = i / 999.0;
    worst = std::max(worst, std::abs(context_accuracy(p, 1.0) - p));
  }
  std::ostringstream s;
  s << "context_accuracy(0.5, 2) = " << half << ", identity max error " << worst;
  return {half == 0.75 && worst <= 1e-12, s.str()};
}

// 6 -------------------------------------------------------------------------

Outcome wer_oracle() {
  using edit_oracle::Seq;
  const auto refs = edit_oracle::all_sequences(3, 1, 6);
  const auto hyps = edit_oracle::all_sequences(3, 0, 6);
  std::size_t pairs = 0, mismatches = 0, enumerated = 0;
  for (const auto& r : refs)
    for (const auto& h : hyps) {
      const EditStats s = align(std::span<const int>(r), std::span<const int>(h));
      const int want = edit_oracle::suffix_distance(r, h);
      bool ok = static_cast<int>(s.errors()) == want && s.ref_len == r.size() &&
                s.deletions + h.size() == s.insertions + r.size();
      if (r.size() <= 4 && h.size() <= 4) {
        ok &= edit_oracle::exhaustive(r, h).cost == want;
        ++enumerated;
      }
      mismatches += !ok;
      ++pairs;
    }
  return {mismatches == 0 && pairs > 0,
          std::to_string(pairs) + " pairs, " + std::to_string(enumerated) +
              " also by path enumeration, " + std::to_string(mismatches) + " mismatches"};
}

// 7 -------------------------------------------------------------------------

AudioBuffer synthetic_utterance(CounterRng& rng) {
  AudioBuffer a;
  const std::size_t n = 8000 + rng.below(24000);
  const double f0 = 90.0 + 200.0 * rng.uniform();
  const double dc = 0.4 * (rng.uniform() - 0.5);
  const int harmonics = 1 + static_cast<int>(rng.below(8));
  a.samples.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double env = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(n));
    double v = 0.0;
    for (int h = 1; h <= harmonics; ++h) v += std::sin(2 * std::numbers::pi * f0 * h * static_cast<double>(t) / 16000.0) / h;
    a.samples[t] = env * v + 0.05 * rng.normal() + dc;
  }
  return a;
}

Outcome snr_fidelity() {
  const auto dir = scratch("snr");
  const auto in_dir = dir / "in";
  fs::create_directories(in_dir);
  Partition fixtures = load_manifest(kFixtures / "audio.tsv");
  std::vector<Utterance> utts;
  for (const auto& u : fixtures.utterances()) {
    Utterance v = u;
    v.audio = (kFixtures / *u.audio).string();
    utts.push_back(std::move(v));
  }
  CounterRng rng(derive_key(77, {}));
  for (std::size_t i = utts.size(); i < 100; ++i) {
    const auto path = in_dir / ("syn" + std::to_string(i) + ".wav");
    write_wav(path, synthetic_utterance(rng));
    utts.push_back({"syn-" + std::to_string(i), {"x"}, path.string(), std::nullopt, {}});
  }
  const Partition part("fidelity", std::move(utts));
  const SnrGrid grid;
  const auto files = corrupt_partition(part, grid, 11, dir / "out");
  double worst = 0.0;
  for (const auto& f : files) {
    const AudioBuffer clean = normalize(read_wav(*part.find(f.id)->audio));
    const AudioBuffer mixed = read_wav(f.path);
    std::vector<double> noise(clean.samples.size());
    for (std::size_t t = 0; t < noise.size(); ++t) noise[t] = mixed.samples[t] / f.scale - clean.samples[t];
    worst = std::max(worst, std::abs(snr_db(clean.samples, noise) - f.snr));
  }
  fs::remove_all(dir);
  return {files.size() == 100 * grid.size() && worst <= 0.1,
          std::to_string(files.size()) + " corrupted files read back, worst deviation " + fmt(worst, 5) +
              " dB"};
}

// 8 -------------------------------------------------------------------------

Outcome lm_validity() {
  const auto corpus = read_text_corpus(kFixtures / "lm_train.txt");
  const auto model = train_kn(corpus, 3);
  std::set<std::vector<NgramModel::WordId>> contexts{{}};
  const auto bos = model.require(kBos);
  for (const auto& s : corpus) {
    std::vector<NgramModel::WordId> seq{bos};
    for (const auto& w : s) seq.push_back(model.lookup(w));
    for (std::size_t i = 1; i <= seq.size(); ++i) {
      contexts.insert({seq[i - 1]});
      if (i >= 2) contexts.insert({seq[i - 2], seq[i - 1]});
    }
  }
  double worst_mass = 0.0;
  for (const auto& h : contexts) worst_mass = std::max(worst_mass, std::abs(model.context_mass(h) - 1.0));

  // Hand oracle on a three-sentence corpus.
  const std::vector<Tokens> toy{{"the", "cat", "sat"}, {"the", "dog", "sat"}, {"the", "cat", "ran"}};
  const auto toy_model = train_kn(toy, 2);
  const double p1 = 2.5 / 3 + (1.0 / 6) * 13.0 / 112, p2 = 1.5 / 3 + (1.0 / 3) * 13.0 / 112,
               p3 = 0.5 / 2 + 0.5 * 27.0 / 112, p4 = 1.5 / 2 + 0.25 * 27.0 / 112;
  const double hand = -(std::log(p1) + std::log(p2) + std::log(p3) + std::log(p4)) / 4;
  const double toy_err = std::abs(nll(toy_model, Tokens{"the", "cat", "sat"}).nll - hand);

  // Direct-interpolation oracle on fixture sentences.
  const kn_oracle::Oracle oracle(corpus, 3);
  double worst_nll = 0.0;
  const Partition dev = load_manifest(kFixtures / "dev.tsv");
  for (const auto& u : dev.utterances()) {
    Tokens h{"<s>"};
    double total = 0.0;
    Tokens seq = u.reference;
    seq.emplace_back("</s>");
    for (const auto& w0 : seq) {
      const std::string w = model.id(w0) ? w0 : std::string(kUnk);
      total += std::log(oracle.prob(Tokens(h.end() - std::min<std::ptrdiff_t>(2, h.size()), h.end()), w));
      h.push_back(w);
    }
    const double want = -total / static_cast<double>(seq.size());
    worst_nll = std::max(worst_nll, std::abs(nll(model, u.reference).nll - want));
  }
  std::ostringstream s;
  s << contexts.size() << " contexts, worst |mass-1| " << worst_mass << "; hand NLL error " << toy_err
    << "; " << dev.size() << " fixture sentences, worst NLL error " << worst_nll;
  return {worst_mass <= 1e-6 && toy_err <= 1e-9 && worst_nll <= 1e-9, s.str()};
}

// 9 -------------------------------------------------------------------------

Outcome binning_replay() {
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
  const auto spec = make_cutpoints(grid);
  const std::vector<double> want{0.05, 0.35, 0.65, 0.95};
  double worst = 0.0, width_spread = 0.0;
  for (std::size_t i = 0; i < 4; ++i) worst = std::max(worst, std::abs(spec.cuts()[i] - want[i]));
  const double w0 = spec.cuts()[1] - spec.cuts()[0];
  for (std::size_t i = 1; i < 3; ++i)
    width_spread = std::max(width_spread, std::abs(spec.cuts()[i + 1] - spec.cuts()[i] - w0));
  std::ostringstream s;
  s << "cuts {" << spec.cuts()[0] << ", " << spec.cuts()[1] << ", " << spec.cuts()[2] << ", "
    << spec.cuts()[3] << "}, worst error " << worst << ", width spread " << width_spread;
  return {spec.cuts().size() == 4 && worst <= 1e-12 && width_spread <= 1e-12, s.str()};
}

// 10 ------------------------------------------------------------------------

std::vector<Partition> fixture_partitions() {
  return {load_manifest(kFixtures / "dev.tsv"), load_manifest(kFixtures / "test.tsv")};
}

std::vector<ErrorRatePoint> fixture_cells(const std::vector<Partition>& parts, const BinSpec& spec) {
  std::vector<ErrorRatePoint> cells;
  for (const std::string system : {"gmm", "tdnn"}) {
    std::vector<Partition> scored = parts;
    for (auto& rec : read_hypotheses(kFixtures / (system + ".hyp.tsv")))
      for (auto& p : scored)
        if (p.find(rec.id)) p.add_hypothesis(rec.id, rec.snr, rec.text);
    for (const auto& p : scored) {
      auto c = score_cells(p, spec, system);
      cells.insert(cells.end(), c.begin(), c.end());
    }
  }
  sort_points(cells, spec);
  return cells;
}

Outcome klakow_sign() {
  const auto parts = fixture_partitions();
  std::vector<double> dev_nll;
  for (const auto& u : parts[0].utterances()) dev_nll.push_back(*u.nll);
  const BinSpec spec = make_cutpoints(dev_nll, 3, 0.05, BinMode::EqualWidth, "dev");
  const auto rows = fit_klakow_cells(fixture_cells(parts, spec), parts, spec);
  std::size_t fitted = 0, positive = 0;
  std::string negatives;
  for (const auto& r : rows) {
    if (!r.fit) continue;
    ++fitted;
    if (r.fit->a > 0.0) ++positive;
    else negatives += " " + r.system + "/" + r.partition + "@" + r.snr.str() + "(a=" + fmt(r.fit->a) + ")";
  }

  SimConfig cfg;
  cfg.seed = 2;
  const auto sim_cells = simulate_cells(cfg, SnrGrid());
  const auto sim = simulate(cfg, SnrGrid({0}));
  const auto sim_rows = fit_klakow_cells(sim_cells, std::vector<Partition>{sim.reference}, cfg.bins);
  std::size_t sim_fitted = 0, sim_positive = 0;
  for (const auto& r : sim_rows) {
    if (!r.fit) continue;
    ++sim_fitted;
    sim_positive += r.fit->a > 0.0;
  }
  std::string detail = "fixture replay: a > 0 in " + std::to_string(positive) + "/" +
                       std::to_string(fitted) + " fitted groups; oracle: " +
                       std::to_string(sim_positive) + "/" + std::to_string(sim_fitted);
  if (!negatives.empty()) detail += "; not positive:" + negatives;
  return {fitted > 0 && positive == fitted && sim_fitted > 0 && sim_positive == sim_fitted, detail};
}

// 11 ------------------------------------------------------------------------

void run_pipeline(const fs::path& out) {
  const auto model = train_kn(read_text_corpus(kFixtures / "lm_train.txt"), 3);
  auto parts = fixture_partitions();
  for (auto& p : parts) {
    const auto scores = score_partition(model, p);
    for (std::size_t i = 0; i < scores.size(); ++i) p.set_nll(i, scores[i].nll);
  }
  std::vector<double> dev_nll;
  for (const auto& u : parts[0].utterances()) dev_nll.push_back(*u.nll);
  ReportInputs in;
  in.bins = make_cutpoints(dev_nll, 3, 0.05, BinMode::EqualWidth, "dev");
  in.cells = fixture_cells(parts, in.bins);
  FitKOptions opts;
  opts.bootstrap.seed = 42;
  opts.bootstrap.threads = 0;
  in.fits = fit_all(in.cells, in.bins, opts);
  for (const auto& p : parts) in.proportions.push_back(proportions(in.bins, p));
  in.provenance["seed"] = 42;
  write_report(build_report(in), out);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  const auto dir = scratch("determinism");
  run_pipeline(dir / "a");
  run_pipeline(dir / "b");
  std::size_t files = 0, differing = 0;
  std::set<std::string> names;
  for (const auto& sub : {"a", "b"})
    for (const auto& e : fs::directory_iterator(dir / sub)) names.insert(e.path().filename().string());
  for (const auto& n : names) {
    ++files;
    if (!fs::exists(dir / "a" / n) || !fs::exists(dir / "b" / n) ||
        slurp(dir / "a" / n) != slurp(dir / "b" / n))
      ++differing;
  }
  fs::remove_all(dir);
  return {files >= 9 && differing == 0,
          std::to_string(files) + " report files, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "oracle k-recovery", oracle_recovery},
      {2, "bootstrap coverage", bootstrap_coverage},
      {3, "degenerate exactness", degenerate_exactness},
      {4, "point-wise replay", pointwise_replay},
      {5, "accuracy curve", curve_check},
      {6, "WER oracle equivalence", wer_oracle},
      {7, "SNR fidelity", snr_fidelity},
      {8, "LM validity", lm_validity},
      {9, "binning replay", binning_replay},
      {10, "Klakow sign", klakow_sign},
      {11, "determinism", determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail
              << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
