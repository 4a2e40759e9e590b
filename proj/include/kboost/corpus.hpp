// include/kboost/corpus.hpp

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

// Evaluation manifests.
//
// A manifest is UTF-8 TSV with the header
//
//   id <TAB> nll <TAB> audio <TAB> text
//
// one utterance per line. `nll` (nats per scored token) and `audio` may be the
// literal "-" when absent. Any further header columns named `hyp@<snr>` carry
// inline recognizer output for that condition (`<snr>` is an integer dB value
// or `clean`); a lone "-" in such a column means no hypothesis.
//
// Hypothesis manifests have the header `id <TAB> snr <TAB> text` and may be
// split across any number of files, e.g. one per SNR.
//
// Text is tokenized on whitespace only. No case folding or punctuation
// handling is done here; normalize transcripts before they reach the toolkit.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "kboost/common.hpp"

namespace kboost {

inline Tokens tokenize(std::string_view text) {
  Tokens out;
  std::size_t i = 0;
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string join(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

struct Utterance {
  std::string id;
  Tokens reference;
  std::optional<std::string> audio;
  std::optional<double> nll;  // nats per scored token
  std::map<Snr, Tokens> hypotheses;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

/// An ordered, named set of utterances with unique ids.
class Partition {
 public:
  Partition() = default;
  Partition(std::string name, std::vector<Utterance> utterances)
      : name_(std::move(name)), utts_(std::move(utterances)) {
    if (name_.empty()) throw Error("partition name must be nonempty");
    for (std::size_t i = 0; i < utts_.size(); ++i) check_and_index(i);
  }

  const std::string& name() const { return name_; }
  const std::vector<Utterance>& utterances() const { return utts_; }
  std::size_t size() const { return utts_.size(); }
  bool empty() const { return utts_.empty(); }

  const Utterance* find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &utts_[it->second];
  }

  /// Attaches a hypothesis; the id must exist and (id, snr) must be new.
  void add_hypothesis(std::string_view id, Snr snr, Tokens hyp) {
    auto it = index_.find(std::string(id));
    if (it == index_.end())
      throw Error("hypothesis for unknown utterance id '" + std::string(id) + "'");
    auto [pos, inserted] = utts_[it->second].hypotheses.emplace(snr, std::move(hyp));
    if (!inserted)
      throw Error("duplicate hypothesis for utterance '" + std::string(id) +
                  "' at SNR " + snr.str());
  }

  void set_nll(std::size_t i, double nll) {
    if (!std::isfinite(nll)) throw Error("NLL for '" + utts_.at(i).id + "' is not finite");
    utts_.at(i).nll = nll;
  }

  /// Every SNR that has at least one hypothesis, ascending.
  std::vector<Snr> snrs() const {
    std::vector<Snr> out;
    for (const auto& u : utts_)
      for (const auto& [snr, hyp] : u.hypotheses) out.push_back(snr);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.name_ == b.name_ && a.utts_ == b.utts_;
  }

 private:
  void check_and_index(std::size_t i) {
    const Utterance& u = utts_[i];
    if (u.id.empty()) throw Error("utterance with empty id in partition " + name_);
    if (u.reference.empty()) throw Error("utterance '" + u.id + "' has an empty reference");
    if (u.nll && !std::isfinite(*u.nll))
      throw Error("utterance '" + u.id + "' has a non-finite NLL");
    if (!index_.emplace(u.id, i).second)
      throw Error("duplicate utterance id '" + u.id + "' in partition " + name_);
  }

  std::string name_;
  std::vector<Utterance> utts_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

inline std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

}  // namespace detail

inline Partition load_manifest(const std::filesystem::path& path, std::string name = {}) {
  if (name.empty()) name = path.stem().string();
  std::ifstream in = detail::open_input(path);
  std::string raw;
  std::size_t lineno = 0;

  if (!std::getline(in, raw)) throw Error(path.string() + ": empty manifest");
  ++lineno;
  const auto header = split_char(strip_cr(raw), '\t');
  if (header.size() < 4 || header[0] != "id" || header[1] != "nll" ||
      header[2] != "audio" || header[3] != "text")
    throw Error(detail::where(path, 1) + "expected header 'id<TAB>nll<TAB>audio<TAB>text'");
  std::vector<Snr> inline_snrs;
  for (std::size_t c = 4; c < header.size(); ++c) {
    if (header[c].substr(0, 4) != "hyp@")
      throw Error(detail::where(path, 1) + "unknown column '" + std::string(header[c]) + "'");
    try {
      inline_snrs.push_back(Snr::parse(header[c].substr(4)));
    } catch (const Error& e) {
      throw Error(detail::where(path, 1) + e.what());
    }
  }

  std::vector<Utterance> utts;
  std::unordered_map<std::string, std::size_t> seen;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string_view line = strip_cr(raw);
    if (line.empty()) continue;
    const auto fields = split_char(line, '\t');
    if (fields.size() != header.size())
      throw Error(detail::where(path, lineno) + "expected " + std::to_string(header.size()) +
                  " fields, found " + std::to_string(fields.size()));
    Utterance u;
    u.id = std::string(fields[0]);
    if (u.id.empty()) throw Error(detail::where(path, lineno) + "empty id");
    if (!seen.emplace(u.id, lineno).second)
      throw Error(detail::where(path, lineno) + "duplicate id '" + u.id + "' (first on line " +
                  std::to_string(seen[u.id]) + ")");
    if (fields[1] != "-") {
      try {
        const double v = parse_double(fields[1], "nll");
        if (!std::isfinite(v)) throw Error("nll is not finite");
        u.nll = v;
      } catch (const Error& e) {
        throw Error(detail::where(path, lineno) + e.what());
      }
    }
    if (fields[2] != "-") u.audio = std::string(fields[2]);
    u.reference = tokenize(fields[3]);
    if (u.reference.empty())
      throw Error(detail::where(path, lineno) + "empty reference transcript for '" + u.id + "'");
    for (std::size_t c = 0; c < inline_snrs.size(); ++c) {
      const std::string_view text = fields[4 + c];
      if (text == "-") continue;
      u.hypotheses.emplace(inline_snrs[c], tokenize(text));
    }
    utts.push_back(std::move(u));
  }
  if (utts.empty()) throw Error(path.string() + ": manifest has no utterances");
  return Partition(std::move(name), std::move(utts));
}

/// Writes a manifest that load_manifest reads back to an equal Partition.
/// Hypotheses become inline `hyp@<snr>` columns.
inline void save_manifest(const Partition& part, const std::filesystem::path& path) {
  const std::vector<Snr> snrs = part.snrs();
  std::ostringstream out;
  out << "id\tnll\taudio\ttext";
  for (const Snr& s : snrs) out << "\thyp@" << s.str();
  out << '\n';
  for (const auto& u : part.utterances()) {
    out << u.id << '\t' << (u.nll ? format_exact(*u.nll) : "-") << '\t'
        << (u.audio ? *u.audio : "-") << '\t' << join(u.reference);
    for (const Snr& s : snrs) {
      auto it = u.hypotheses.find(s);
      out << '\t' << (it == u.hypotheses.end() ? "-" : join(it->second));
    }
    out << '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << out.str();
}

struct HypothesisRecord {
  std::string id;
  Snr snr;
  Tokens text;
};

inline std::vector<HypothesisRecord> read_hypotheses(const std::filesystem::path& path) {
  std::ifstream in = detail::open_input(path);
  std::string raw;
  if (!std::getline(in, raw) || strip_cr(raw) != "id\tsnr\ttext")
    throw Error(detail::where(path, 1) + "expected header 'id<TAB>snr<TAB>text'");
  std::vector<HypothesisRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string_view line = strip_cr(raw);
    if (line.empty()) continue;
    const auto fields = split_char(line, '\t');
    if (fields.size() != 3)
      throw Error(detail::where(path, lineno) + "expected 3 fields, found " +
                  std::to_string(fields.size()));
    if (fields[0].empty()) throw Error(detail::where(path, lineno) + "empty id");
    try {
      out.push_back({std::string(fields[0]), Snr::parse(fields[1]), tokenize(fields[2])});
    } catch (const Error& e) {
      throw Error(detail::where(path, lineno) + e.what());
    }
  }
  return out;
}

/// Merges a hypothesis manifest into a partition.
inline void load_hypotheses(Partition& part, const std::filesystem::path& path) {
  for (auto& rec : read_hypotheses(path)) {
    try {
      part.add_hypothesis(rec.id, rec.snr, std::move(rec.text));
    } catch (const Error& e) {
      throw Error(path.string() + ": " + e.what());
    }
  }
}

inline void write_hypotheses(const std::vector<HypothesisRecord>& records,
                             const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << "id\tsnr\ttext\n";
  for (const auto& r : records) f << r.id << '\t' << r.snr.str() << '\t' << join(r.text) << '\n';
}

/// One sentence per nonblank line; used for LM training text.
inline std::vector<Tokens> read_text_corpus(const std::filesystem::path& path) {
  std::ifstream in = detail::open_input(path);
  std::vector<Tokens> out;
  std::string raw;
  while (std::getline(in, raw)) {
    Tokens t = tokenize(raw);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace kboost
