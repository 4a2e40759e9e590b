// tools/kboost_cli.cpp

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

// kboost: command-line front end. Every option lives on the top-level app so
// a flat config file (--config) maps onto flags one to one; each command
// checks the options it needs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kboost/kboost.hpp"

namespace fs = std::filesystem;
using namespace kboost;

namespace {

struct Options {
  std::vector<std::string> manifests;
  std::vector<std::string> hyp_manifests;
  std::vector<std::string> wer_files;
  std::string arpa;
  std::string train_corpus;
  std::string save_arpa;
  int order = 3;
  std::size_t nbins = 3;
  double trim = 0.05;
  bool equal_mass = false;
  std::string bins;
  std::string snrs;
  std::size_t boot = 9999;
  std::uint64_t seed = 0;
  std::string out;
  double target_error = 0.5;
  std::string fits;
  std::string method = "nls";
  std::string audio_root;
  unsigned threads = 0;
  // simulate
  double k_hp = 2.72;
  double k_lp = 1.38;
  std::size_t utts_per_bin = 500;
  std::size_t words_per_utt = 20;
  std::size_t vocab = 1000;
  double midpoint = 10.0;
  double slope = 0.15;
};

/// "name=path" or a bare path named by its file name up to the first dot.
std::pair<std::string, fs::path> named_path(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq != std::string::npos && eq > 0) return {arg.substr(0, eq), arg.substr(eq + 1)};
  const std::string file = fs::path(arg).filename().string();
  return {file.substr(0, file.find('.')), arg};
}

void need(bool ok, const std::string& what) {
  if (!ok) throw Error(what);
}

std::vector<Partition> load_partitions(const Options& o) {
  need(!o.manifests.empty(), "--manifest is required");
  std::vector<Partition> parts;
  for (const auto& m : o.manifests) {
    auto [name, path] = named_path(m);
    parts.push_back(load_manifest(path, name));
  }
  return parts;
}

Partition load_one_partition(const Options& o) {
  need(o.manifests.size() == 1, "exactly one --manifest is required");
  return load_partitions(o).front();
}

std::optional<NgramModel> load_lm(const Options& o) {
  need(o.arpa.empty() || o.train_corpus.empty(), "give either --arpa or --train-corpus, not both");
  if (!o.arpa.empty()) return load_arpa(fs::path(o.arpa));
  if (!o.train_corpus.empty()) {
    NgramModel m = train_kn(read_text_corpus(o.train_corpus), o.order);
    if (!o.save_arpa.empty()) save_arpa(m, fs::path(o.save_arpa));
    return m;
  }
  return std::nullopt;
}

void apply_lm(const NgramModel& lm, Partition& part, unsigned threads) {
  const auto scores = score_partition(lm, part, threads);
  for (std::size_t i = 0; i < scores.size(); ++i) part.set_nll(i, scores[i].nll);
}

BinSpec load_bin_spec(const Options& o) {
  need(!o.bins.empty(), "--bins is required");
  return load_bins(o.bins);
}

std::vector<ErrorRatePoint> load_cells(const Options& o) {
  need(!o.wer_files.empty(), "--wer is required");
  std::vector<ErrorRatePoint> cells;
  for (const auto& w : o.wer_files) {
    auto part = read_wer_csv(w);
    cells.insert(cells.end(), part.begin(), part.end());
  }
  return cells;
}

FitKOptions fit_options(const Options& o) {
  FitKOptions f;
  if (o.method == "nls") f.method = FitMethod::Nls;
  else if (o.method == "log-ols") f.method = FitMethod::LogOls;
  else throw Error("--method must be nls or log-ols");
  f.bootstrap.n_boot = o.boot;
  f.bootstrap.seed = o.seed;
  f.bootstrap.threads = o.threads;
  return f;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

std::string need_out(const Options& o) {
  need(!o.out.empty(), "--out is required");
  return o.out;
}

nlohmann::ordered_json file_record(const std::string& role, const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return {{"role", role}, {"file", path.filename().string()}, {"fnv1a", hex64(fnv1a(bytes))}};
}

// Commands -------------------------------------------------------------------

void cmd_score_nll(const Options& o) {
  Partition part = load_one_partition(o);
  const auto lm = load_lm(o);
  need(lm.has_value(), "score-nll needs --arpa or --train-corpus");
  apply_lm(*lm, part, o.threads);
  save_manifest(part, need_out(o));
}

void cmd_make_bins(const Options& o) {
  const Partition part = load_one_partition(o);
  std::vector<double> nlls;
  for (const auto& u : part.utterances()) {
    need(u.nll.has_value(), "utterance " + u.id + " has no NLL; run score-nll first");
    nlls.push_back(*u.nll);
  }
  const auto spec = make_cutpoints(nlls, o.nbins, o.trim,
                                   o.equal_mass ? BinMode::EqualMass : BinMode::EqualWidth,
                                   part.name());
  save_bins(spec, need_out(o));
}

void cmd_assign_bins(const Options& o) {
  const Partition part = load_one_partition(o);
  const BinSpec spec = load_bin_spec(o);
  const auto props = proportions(spec, part);
  std::ostringstream tsv;
  tsv << "id\tnll\tbin\n";
  for (const auto& u : part.utterances())
    tsv << u.id << '\t' << format_exact(*u.nll) << '\t' << spec.assign(*u.nll) << '\n';
  write_text(need_out(o), tsv.str());
  std::cout << part.name();
  for (std::size_t b = 0; b < props.labels.size(); ++b)
    std::cout << ' ' << props.labels[b] << '=' << percent(props.fractions[b]);
  std::cout << " total=" << percent(props.total) << '\n';
}

void cmd_corrupt(const Options& o) {
  const Partition part = load_one_partition(o);
  const SnrGrid grid = o.snrs.empty() ? SnrGrid() : SnrGrid::parse(o.snrs);
  fs::path root = o.audio_root;
  if (root.empty()) root = fs::path(named_path(o.manifests.front()).second).parent_path();
  const auto files = corrupt_partition(part, grid, o.seed, need_out(o), root, o.threads);
  std::cout << files.size() << " files written\n";
}

void cmd_score_wer(const Options& o) {
  std::vector<Partition> parts = load_partitions(o);
  const BinSpec spec = load_bin_spec(o);
  need(!o.hyp_manifests.empty(), "--hyp-manifest is required");
  std::vector<ErrorRatePoint> cells;
  for (const auto& h : o.hyp_manifests) {
    auto [system, path] = named_path(h);
    std::vector<Partition> scored = parts;
    for (auto& rec : read_hypotheses(path)) {
      Partition* home = nullptr;
      for (auto& p : scored)
        if (p.find(rec.id)) home = &p;
      if (!home) throw Error(path.string() + ": hypothesis for unknown utterance id '" + rec.id + "'");
      home->add_hypothesis(rec.id, rec.snr, std::move(rec.text));
    }
    for (const auto& p : scored) {
      auto c = score_cells(p, spec, system, o.threads);
      cells.insert(cells.end(), c.begin(), c.end());
    }
  }
  sort_points(cells, spec);
  write_wer_csv(cells, need_out(o));
}

void cmd_fit_k(const Options& o) {
  const auto cells = load_cells(o);
  const BinSpec spec = load_bin_spec(o);
  const auto fits = fit_all(cells, spec, fit_options(o));
  auto arr = nlohmann::ordered_json::array();
  for (const auto& f : fits) arr.push_back(f.to_json());
  write_text(need_out(o), arr.dump(2) + "\n");
  for (const auto& f : fits)
    std::cout << f.partition << ' ' << f.system << ' ' << f.context_bin << " k=" << format_fixed(f.k, 3)
              << " ci=[" << maybe_fixed(f.ci_low, 3) << ", " << maybe_fixed(f.ci_high, 3) << "]\n";
}

void cmd_fit_klakow(const Options& o) {
  const auto cells = load_cells(o);
  const BinSpec spec = load_bin_spec(o);
  const auto parts = load_partitions(o);
  const auto rows = fit_klakow_cells(cells, parts, spec);
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) arr.push_back(r.to_json());
  write_text(need_out(o), arr.dump(2) + "\n");
}

void cmd_simulate(const Options& o) {
  SimConfig cfg;
  cfg.k_per_bin = {{"HP", o.k_hp}, {"LP", o.k_lp}, {"ZP", 1.0}};
  cfg.psychometric = {o.midpoint, o.slope};
  cfg.utts_per_bin = o.utts_per_bin;
  cfg.words_per_utt = o.words_per_utt;
  cfg.vocab_size = o.vocab;
  cfg.seed = o.seed;
  const SnrGrid grid = o.snrs.empty() ? SnrGrid() : SnrGrid::parse(o.snrs);
  const auto sim = simulate(cfg, grid);
  const fs::path dir = need_out(o);
  fs::create_directories(dir);
  save_manifest(sim.reference, dir / (cfg.partition + ".tsv"));
  write_hypotheses(sim.hypotheses, dir / (cfg.system + ".hyp.tsv"));
  save_bins(sim.bins, dir / "bins.json");
}

void cmd_report(const Options& o) {
  ReportInputs in;
  in.bins = load_bin_spec(o);
  in.cells = load_cells(o);
  auto inputs = nlohmann::ordered_json::array();
  inputs.push_back(file_record("bins", o.bins));
  for (const auto& w : o.wer_files) inputs.push_back(file_record("wer", w));
  if (!o.fits.empty()) {
    std::ifstream f(o.fits, std::ios::binary);
    if (!f) throw Error("cannot open " + o.fits);
    nlohmann::json arr;
    try {
      arr = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
      throw Error(o.fits + ": " + e.what());
    }
    for (const auto& j : arr) in.fits.push_back(KFit::from_json(j));
    inputs.push_back(file_record("fits", o.fits));
  } else {
    in.fits = fit_all(in.cells, in.bins, fit_options(o));
  }
  for (const auto& m : o.manifests) {
    auto [name, path] = named_path(m);
    in.proportions.push_back(proportions(in.bins, load_manifest(path, name)));
    inputs.push_back(file_record("manifest", path));
  }
  in.provenance["files"] = inputs;
  in.provenance["seed"] = o.seed;
  in.provenance["n_boot"] = o.boot;
  in.provenance["method"] = o.method;
  write_report(build_report(in), need_out(o));
}

void cmd_quick_k(const Options& o) {
  Partition part = load_one_partition(o);
  need(o.hyp_manifests.size() == 1, "quick-k needs exactly one --hyp-manifest");
  if (const auto lm = load_lm(o)) apply_lm(*lm, part, o.threads);
  load_hypotheses(part, named_path(o.hyp_manifests.front()).second);
  QuickKOptions q;
  q.target_error = o.target_error;
  q.threads = o.threads;
  const auto r = quick_k(part, q);
  nlohmann::ordered_json j;
  j["partition"] = part.name();
  j["k"] = r.k;
  j["snr"] = r.snr.str();
  j["e_high_nll"] = r.e_high;
  j["e_low_nll"] = r.e_low;
  j["median_nll"] = r.median_nll;
  j["n_low"] = r.n_low;
  j["n_high"] = r.n_high;
  j["target_error"] = o.target_error;
  if (!o.out.empty()) write_text(o.out, j.dump(2) + "\n");
  std::cout << "k=" << format_fixed(r.k, 3) << " snr=" << r.snr.str()
            << " e_high=" << format_fixed(r.e_high, 3) << " e_low=" << format_fixed(r.e_low, 3) << '\n';
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kboost: context benefit of recognizers from NLL-binned error rates"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "flat key = value file mirroring the flags");
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--manifest", o.manifests, "utterance manifest ([name=]path), repeatable");
  app.add_option("--hyp-manifest", o.hyp_manifests, "hypothesis manifest ([system=]path), repeatable");
  app.add_option("--wer", o.wer_files, "per-cell error rate CSV, repeatable");
  app.add_option("--arpa", o.arpa, "ARPA language model");
  app.add_option("--train-corpus", o.train_corpus, "LM training text, one sentence per line");
  app.add_option("--save-arpa", o.save_arpa, "write the trained LM here");
  app.add_option("--order", o.order, "n-gram order for --train-corpus")->check(CLI::Range(1, 5));
  app.add_option("--nbins", o.nbins, "number of NLL bins")->check(CLI::PositiveNumber);
  app.add_option("--trim", o.trim, "fraction trimmed from each tail before cutting");
  app.add_flag("--equal-mass", o.equal_mass, "equal-mass bins instead of equal-width");
  app.add_option("--bins", o.bins, "bin spec JSON");
  app.add_option("--snrs", o.snrs, "SNR grid: 'a,b,c' or 'lo:step:hi'");
  app.add_option("--boot", o.boot, "bootstrap replicates");
  app.add_option("--seed", o.seed, "random seed")->envname("KBOOST_SEED");
  app.add_option("--out", o.out, "output file or directory");
  app.add_option("--target-error", o.target_error, "quick-k target error rate");
  app.add_option("--fits", o.fits, "k fits JSON from fit-k");
  app.add_option("--method", o.method, "nls or log-ols");
  app.add_option("--audio-root", o.audio_root, "base directory for relative audio paths");
  app.add_option("--threads", o.threads, "worker threads (0 = hardware)");
  app.add_option("--k-hp", o.k_hp, "simulate: k of HP");
  app.add_option("--k-lp", o.k_lp, "simulate: k of LP");
  app.add_option("--utts-per-bin", o.utts_per_bin, "simulate: utterances per bin");
  app.add_option("--words-per-utt", o.words_per_utt, "simulate: words per utterance");
  app.add_option("--vocab", o.vocab, "simulate: vocabulary size");
  app.add_option("--midpoint", o.midpoint, "simulate: psychometric midpoint (dB)");
  app.add_option("--slope", o.slope, "simulate: psychometric slope (per dB)");

  const std::vector<std::pair<std::string, void (*)(const Options&)>> commands{
      {"score-nll", cmd_score_nll},     {"make-bins", cmd_make_bins},
      {"assign-bins", cmd_assign_bins}, {"corrupt", cmd_corrupt},
      {"score-wer", cmd_score_wer},     {"fit-k", cmd_fit_k},
      {"fit-klakow", cmd_fit_klakow},   {"simulate", cmd_simulate},
      {"report", cmd_report},           {"quick-k", cmd_quick_k},
  };
  const std::map<std::string, std::string> help{
      {"score-nll", "per-utterance NLL from an LM, written into the manifest"},
      {"make-bins", "NLL cutpoints from a partition"},
      {"assign-bins", "bin label per utterance and bin proportions"},
      {"corrupt", "white-noise copies of every utterance at each SNR"},
      {"score-wer", "pooled error rate per (system, partition, bin, SNR)"},
      {"fit-k", "context exponent k with bootstrap intervals"},
      {"fit-klakow", "log-linear fit of error rate against NLL"},
      {"simulate", "manifests from the simulated recognizer"},
      {"report", "tables, figure data and provenance"},
      {"quick-k", "median split, one SNR, point-wise k"},
  };
  for (const auto& [name, fn] : commands) app.add_subcommand(name, help.at(name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "kboost: error: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    for (const auto& [name, fn] : commands)
      if (app.got_subcommand(name)) fn(o);
  } catch (const std::exception& e) {
    std::cerr << "kboost: error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}
