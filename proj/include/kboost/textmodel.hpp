// include/kboost/textmodel.hpp

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

// Backoff n-gram language model: interpolated modified Kneser-Ney training,
// ARPA input/output, and per-utterance negative log likelihood.
//
// All probabilities are held as natural logarithms. ARPA files store log10;
// conversion happens only in load_arpa/save_arpa.
//
// NLL convention: for a sentence of L words, the model predicts each word and
// then the end marker, conditioned on the begin marker. The result is
//   H = -(1/(L+1)) * sum of ln P over those L+1 events,
// i.e. nats per scored token. Words outside the vocabulary are scored as <unk>.

#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "kboost/common.hpp"
#include "kboost/corpus.hpp"
#include "kboost/parallel.hpp"

namespace kboost {

inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";
inline constexpr std::string_view kUnk = "<unk>";

/// ARPA's conventional stand-in for log10(0), used for the begin marker.
inline constexpr double kArpaLog10Zero = -99.0;

namespace detail {

struct NgramEntry {
  double log_prob = 0.0;  // ln P(last word | preceding words)
  double backoff = 0.0;   // ln of the backoff weight when used as a context
};

using NgramTables = std::vector<std::map<std::vector<std::int32_t>, NgramEntry>>;

/// ln P(word | context) by backoff; nullopt when the word has no unigram.
inline std::optional<double> backoff_log_prob(const NgramTables& tables,
                                              std::span<const std::int32_t> context,
                                              std::int32_t word) {
  double acc = 0.0;
  std::vector<std::int32_t> key;
  for (std::size_t start = 0; start <= context.size(); ++start) {
    key.assign(context.begin() + static_cast<std::ptrdiff_t>(start), context.end());
    key.push_back(word);
    const auto& table = tables[key.size() - 1];
    if (auto it = table.find(key); it != table.end()) return acc + it->second.log_prob;
    if (start < context.size()) {
      key.pop_back();
      const auto& ctx_table = tables[key.size() - 1];
      if (auto c = ctx_table.find(key); c != ctx_table.end()) acc += c->second.backoff;
    }
  }
  return std::nullopt;
}

}  // namespace detail

class NgramModel {
 public:
  using WordId = std::int32_t;
  using Key = std::vector<WordId>;
  using Entry = detail::NgramEntry;

  NgramModel() = default;

  /// `vocab` is the id -> word table; tables[n-1] holds the n-grams.
  NgramModel(std::vector<std::string> vocab, detail::NgramTables tables)
      : vocab_(std::move(vocab)), tables_(std::move(tables)) {
    if (tables_.empty()) throw Error("n-gram model needs at least one order");
    for (std::size_t i = 0; i < vocab_.size(); ++i)
      if (!ids_.emplace(vocab_[i], static_cast<WordId>(i)).second)
        throw Error("duplicate vocabulary entry '" + vocab_[i] + "'");
    for (const auto& table : tables_)
      for (const auto& [key, e] : table) {
        if (!(e.log_prob <= 0.0) || !std::isfinite(e.log_prob))
          throw Error("n-gram log-probability must be finite and <= 0");
        if (!std::isfinite(e.backoff)) throw Error("n-gram backoff weight must be finite");
      }
  }

  int order() const { return static_cast<int>(tables_.size()); }
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  const std::map<Key, Entry>& ngrams(int n) const { return tables_.at(n - 1); }

  std::optional<WordId> id(std::string_view word) const {
    auto it = ids_.find(std::string(word));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  WordId require(std::string_view word) const {
    auto w = id(word);
    if (!w) throw Error("model vocabulary lacks '" + std::string(word) + "'");
    return *w;
  }

  /// Maps a word to its id, falling back to <unk>.
  WordId lookup(std::string_view word) const {
    if (auto w = id(word)) return *w;
    if (auto u = id(kUnk)) return *u;
    throw Error("out-of-vocabulary word '" + std::string(word) + "' and the model has no " +
                std::string(kUnk));
  }

  /// ln P(word | context) with standard backoff. Only the last order-1
  /// context words are used.
  double log_prob(std::span<const WordId> context, WordId word) const {
    const std::size_t max_ctx = static_cast<std::size_t>(order() - 1);
    if (context.size() > max_ctx) context = context.subspan(context.size() - max_ctx);
    if (auto lp = detail::backoff_log_prob(tables_, context, word)) return *lp;
    throw Error("word '" + vocab_.at(static_cast<std::size_t>(word)) + "' has no unigram entry");
  }

  /// Sum of P(w | context) over every predictable word (all but <s>).
  double context_mass(std::span<const WordId> context) const {
    const auto bos = id(kBos);
    double total = 0.0;
    for (std::size_t w = 0; w < vocab_.size(); ++w) {
      if (bos && static_cast<WordId>(w) == *bos) continue;
      total += std::exp(log_prob(context, static_cast<WordId>(w)));
    }
    return total;
  }

  friend bool operator==(const NgramModel& a, const NgramModel& b) {
    if (a.vocab_ != b.vocab_ || a.tables_.size() != b.tables_.size()) return false;
    for (std::size_t n = 0; n < a.tables_.size(); ++n) {
      if (a.tables_[n].size() != b.tables_[n].size()) return false;
      auto ib = b.tables_[n].begin();
      for (const auto& [key, e] : a.tables_[n]) {
        if (key != ib->first || e.log_prob != ib->second.log_prob ||
            e.backoff != ib->second.backoff)
          return false;
        ++ib;
      }
    }
    return true;
  }

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, WordId> ids_;
  detail::NgramTables tables_;
};

struct KneserNeyOptions {
  /// Words seen fewer times than this are mapped to <unk> before counting.
  std::size_t min_count = 1;
  /// Discount used for every count class when the count-of-counts estimate
  /// is undefined or out of range.
  double fallback_discount = 0.5;
};

/// Discounts for count classes 1, 2 and 3+.
struct Discounts {
  std::array<double, 3> d{0.5, 0.5, 0.5};
  bool fallback = true;

  double operator()(std::size_t count) const {
    if (count == 0) return 0.0;
    return d[std::min<std::size_t>(count, 3) - 1];
  }
};

/// D1..D3+ from the count-of-counts n1..n4 (Chen & Goodman estimates).
inline Discounts estimate_discounts(const std::array<std::size_t, 4>& n, double fallback) {
  Discounts out;
  out.d = {fallback, fallback, fallback};
  out.fallback = true;
  if (n[0] == 0 || n[1] == 0 || n[2] == 0 || n[3] == 0) return out;
  const double n1 = static_cast<double>(n[0]), n2 = static_cast<double>(n[1]),
               n3 = static_cast<double>(n[2]), n4 = static_cast<double>(n[3]);
  const double y = n1 / (n1 + 2.0 * n2);
  const std::array<double, 3> d{1.0 - 2.0 * y * n2 / n1, 2.0 - 3.0 * y * n3 / n2,
                                3.0 - 4.0 * y * n4 / n3};
  for (std::size_t i = 0; i < 3; ++i)
    if (!(d[i] > 0.0 && d[i] < static_cast<double>(i + 1))) return out;
  out.d = d;
  out.fallback = false;
  return out;
}

namespace detail {

using CountTable = std::map<NgramModel::Key, std::size_t>;

}  // namespace detail

/// Trains an interpolated modified Kneser-Ney model. Begin/end markers are
/// added to every sentence. The result is stored in backoff form: seen
/// n-grams hold their interpolated probability and each context holds its
/// interpolation weight as the backoff, which reproduces the interpolated
/// distribution exactly.
inline NgramModel train_kn(const std::vector<Tokens>& corpus, int order,
                           const KneserNeyOptions& opts = {}) {
  using Key = NgramModel::Key;
  using WordId = NgramModel::WordId;
  if (order < 1 || order > 5) throw Error("n-gram order must be in [1,5], got " + std::to_string(order));
  std::map<std::string, std::size_t> word_counts;
  std::size_t n_tokens = 0;
  for (const auto& s : corpus)
    for (const auto& w : s) {
      if (w == kBos || w == kEos || w == kUnk)
        throw Error("training text contains reserved token '" + w + "'");
      ++word_counts[w];
      ++n_tokens;
    }
  if (n_tokens == 0) throw Error("training corpus has no tokens");

  std::set<std::string> vocab_set{std::string(kBos), std::string(kEos), std::string(kUnk)};
  for (const auto& [w, c] : word_counts)
    if (c >= opts.min_count) vocab_set.insert(w);
  std::vector<std::string> vocab(vocab_set.begin(), vocab_set.end());
  std::unordered_map<std::string, WordId> ids;
  for (std::size_t i = 0; i < vocab.size(); ++i) ids.emplace(vocab[i], static_cast<WordId>(i));
  const WordId bos = ids.at(std::string(kBos));
  const WordId eos = ids.at(std::string(kEos));
  const WordId unk = ids.at(std::string(kUnk));

  const auto N = static_cast<std::size_t>(order);
  std::vector<detail::CountTable> raw(N);
  for (const auto& s : corpus) {
    Key seq;
    seq.reserve(s.size() + 2);
    seq.push_back(bos);
    for (const auto& w : s) {
      auto it = ids.find(w);
      seq.push_back(it == ids.end() ? unk : it->second);
    }
    seq.push_back(eos);
    // Every n-gram that ends at a predicted position (1..end).
    for (std::size_t end = 1; end < seq.size(); ++end)
      for (std::size_t n = 1; n <= N && n <= end + 1; ++n)
        ++raw[n - 1][Key(seq.begin() + static_cast<std::ptrdiff_t>(end + 1 - n),
                         seq.begin() + static_cast<std::ptrdiff_t>(end + 1))];
  }
  // Adjusted counts: raw at the top order and for n-grams anchored at <s>;
  // otherwise the number of distinct one-word left extensions.
  std::vector<detail::CountTable> adj(N);
  adj[N - 1] = raw[N - 1];
  for (std::size_t n = N - 1; n >= 1; --n) {
    detail::CountTable& level = adj[n - 1];
    for (const auto& [key, c] : raw[n - 1])
      if (key.front() == bos) level[key] = c;
    // Keys at order n+1 are distinct, so each is one distinct extension.
    for (const auto& [key, c] : raw[n]) ++level[Key(key.begin() + 1, key.end())];
  }

  std::vector<Discounts> discounts(N);
  for (std::size_t n = 1; n <= N; ++n) {
    std::array<std::size_t, 4> coc{0, 0, 0, 0};
    for (const auto& [key, c] : adj[n - 1])
      if (c >= 1 && c <= 4) ++coc[c - 1];
    discounts[n - 1] = estimate_discounts(coc, opts.fallback_discount);
  }

  detail::NgramTables tables(N);
  const double ln10 = std::numbers::ln10;

  // Unigrams: interpolate with the uniform distribution over every
  // predictable word, which is how <unk> and unseen words receive mass.
  {
    const Discounts& D = discounts[0];
    double total = 0.0, discounted = 0.0;
    for (const auto& [key, c] : adj[0]) {
      total += static_cast<double>(c);
      discounted += D(c);
    }
    const double gamma = discounted / total;
    const double uniform = 1.0 / static_cast<double>(vocab.size() - 1);
    for (std::size_t w = 0; w < vocab.size(); ++w) {
      const Key key{static_cast<WordId>(w)};
      NgramModel::Entry e;
      if (static_cast<WordId>(w) == bos) {
        e.log_prob = kArpaLog10Zero * ln10;
      } else {
        auto it = adj[0].find(key);
        const std::size_t c = it == adj[0].end() ? 0 : it->second;
        const double p = std::max(static_cast<double>(c) - D(c), 0.0) / total + gamma * uniform;
        e.log_prob = std::log(p);
      }
      tables[0].emplace(key, e);
    }
  }

  for (std::size_t n = 2; n <= N; ++n) {
    const Discounts& D = discounts[n - 1];
    const detail::CountTable& level = adj[n - 1];
    // Group by context; std::map order keeps siblings contiguous.
    auto it = level.begin();
    while (it != level.end()) {
      const Key context(it->first.begin(), it->first.end() - 1);
      auto group_end = it;
      double total = 0.0, discounted = 0.0;
      while (group_end != level.end() &&
             std::equal(context.begin(), context.end(), group_end->first.begin())) {
        total += static_cast<double>(group_end->second);
        discounted += D(group_end->second);
        ++group_end;
      }
      const double gamma = discounted / total;
      const Key lower_ctx(context.begin() + 1, context.end());
      for (auto g = it; g != group_end; ++g) {
        // Lower orders are complete by now, so this is the final P(w | h').
        const auto lower_lp = detail::backoff_log_prob(tables, lower_ctx, g->first.back());
        if (!lower_lp) throw Error("internal: missing lower-order n-gram during training");
        const double p = std::max(static_cast<double>(g->second) - D(g->second), 0.0) / total +
                         gamma * std::exp(*lower_lp);
        tables[n - 1].emplace(g->first, NgramModel::Entry{std::log(p), 0.0});
      }
      auto ctx_entry = tables[n - 2].find(context);
      if (ctx_entry == tables[n - 2].end())
        throw Error("internal: context without an entry at the lower order");
      ctx_entry->second.backoff = std::log(gamma);
      it = group_end;
    }
  }
  return NgramModel(std::move(vocab), std::move(tables));
}

/// Per-utterance negative log likelihood in nats per scored token.
struct NllScore {
  std::string utterance_id;
  double nll = 0.0;
  std::size_t token_count = 0;  // scored events
};

/// H = -(1/L) ln Q(y). With `end_event` false the end marker is neither
/// scored nor counted in L.
inline NllScore nll(const NgramModel& model, std::span<const std::string> tokens,
                    bool end_event = true) {
  if (tokens.empty()) throw Error("cannot score an empty token sequence");
  std::vector<NgramModel::WordId> history;
  history.reserve(tokens.size() + 1);
  history.push_back(model.require(kBos));
  double total = 0.0;
  for (const auto& t : tokens) {
    const auto w = model.lookup(t);
    total += model.log_prob(history, w);
    history.push_back(w);
  }
  std::size_t events = tokens.size();
  if (end_event) {
    total += model.log_prob(history, model.require(kEos));
    ++events;
  }
  return NllScore{{}, -total / static_cast<double>(events), events};
}

/// Scores every utterance of a partition; utterances are independent.
inline std::vector<NllScore> score_partition(const NgramModel& model, const Partition& part,
                                             unsigned threads = 0) {
  std::vector<NllScore> out(part.size());
  parallel_for(part.size(), threads, [&](std::size_t i) {
    const auto& u = part.utterances()[i];
    out[i] = nll(model, u.reference);
    out[i].utterance_id = u.id;
  });
  return out;
}

// ARPA ----------------------------------------------------------------------

inline void save_arpa(const NgramModel& model, std::ostream& out) {
  const double ln10 = std::numbers::ln10;
  const auto& vocab = model.vocabulary();
  out << "\n\\data\\\n";
  for (int n = 1; n <= model.order(); ++n)
    out << "ngram " << n << '=' << model.ngrams(n).size() << '\n';
  for (int n = 1; n <= model.order(); ++n) {
    out << "\n\\" << n << "-grams:\n";
    for (const auto& [key, e] : model.ngrams(n)) {
      out << format_exact(e.log_prob / ln10) << '\t';
      for (std::size_t i = 0; i < key.size(); ++i) {
        if (i) out << ' ';
        out << vocab[static_cast<std::size_t>(key[i])];
      }
      if (n < model.order() && e.backoff != 0.0) out << '\t' << format_exact(e.backoff / ln10);
      out << '\n';
    }
  }
  out << "\n\\end\\\n";
}

inline void save_arpa(const NgramModel& model, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  save_arpa(model, f);
}

inline NgramModel load_arpa(std::istream& in, const std::string& source = "<arpa>") {
  using Key = NgramModel::Key;
  const double ln10 = std::numbers::ln10;
  std::string raw;
  std::size_t lineno = 0;
  const auto fail = [&](const std::string& msg) -> Error {
    return Error(source + ":" + std::to_string(lineno) + ": " + msg);
  };
  const auto next = [&](std::string_view& line) {
    while (std::getline(in, raw)) {
      ++lineno;
      line = strip_cr(raw);
      std::size_t a = line.find_first_not_of(" \t");
      if (a == std::string_view::npos) continue;
      line = line.substr(a, line.find_last_not_of(" \t") - a + 1);
      return true;
    }
    return false;
  };

  std::string_view line;
  bool found_data = false;
  while (next(line)) {
    if (line == "\\data\\") {
      found_data = true;
      break;
    }
  }
  if (!found_data) throw fail("missing \\data\\ section");

  std::vector<std::size_t> declared;
  bool have_line = next(line);
  while (have_line && line.substr(0, 6) == "ngram ") {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw fail("malformed count line");
    const auto n = static_cast<std::size_t>(parse_double(line.substr(6, eq - 6), "order"));
    const auto c = static_cast<std::size_t>(parse_double(line.substr(eq + 1), "count"));
    if (n != declared.size() + 1) throw fail("n-gram counts must be listed in order 1, 2, ...");
    declared.push_back(c);
    have_line = next(line);
  }
  if (declared.empty()) throw fail("no n-gram counts in \\data\\ section");
  if (declared.size() > 5) throw fail("orders above 5 are not supported");

  std::vector<std::string> vocab;
  std::unordered_map<std::string, NgramModel::WordId> ids;
  detail::NgramTables tables(declared.size());

  for (std::size_t n = 1; n <= declared.size(); ++n) {
    const std::string expect = "\\" + std::to_string(n) + "-grams:";
    if (!have_line || line != expect) throw fail("expected section header '" + expect + "'");
    std::size_t count = 0;
    while ((have_line = next(line)) && line.front() != '\\') {
      std::vector<std::string_view> fields;
      std::size_t i = 0;
      while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) fields.push_back(line.substr(i, j - i));
        i = j;
      }
      if (fields.size() != n + 1 && fields.size() != n + 2)
        throw fail("expected " + std::to_string(n + 1) + " or " + std::to_string(n + 2) +
                   " fields in a " + std::to_string(n) + "-gram entry");
      NgramModel::Entry e;
      try {
        e.log_prob = parse_double(fields[0], "log-probability") * ln10;
        if (fields.size() == n + 2) e.backoff = parse_double(fields[n + 1], "backoff") * ln10;
      } catch (const Error& err) {
        throw fail(err.what());
      }
      if (!(e.log_prob <= 0.0)) throw fail("positive log-probability");
      Key key;
      for (std::size_t k = 1; k <= n; ++k) {
        std::string w(fields[k]);
        if (n == 1) {
          if (ids.count(w)) throw fail("duplicate unigram '" + w + "'");
          ids.emplace(w, static_cast<NgramModel::WordId>(vocab.size()));
          vocab.push_back(w);
        }
        auto it = ids.find(w);
        if (it == ids.end()) throw fail("word '" + w + "' has no unigram entry");
        key.push_back(it->second);
      }
      if (!tables[n - 1].emplace(std::move(key), e).second) throw fail("duplicate n-gram");
      ++count;
    }
    if (count != declared[n - 1])
      throw fail("section \\" + std::to_string(n) + "-grams: declares " +
                 std::to_string(declared[n - 1]) + " entries but lists " + std::to_string(count));
  }
  if (!have_line || line != "\\end\\") throw fail("expected \\end\\");
  try {
    return NgramModel(std::move(vocab), std::move(tables));
  } catch (const Error& e) {
    throw Error(source + ": " + e.what());
  }
}

inline NgramModel load_arpa(const std::filesystem::path& path) {
  std::ifstream f = detail::open_input(path);
  return load_arpa(f, path.string());
}

}  // namespace kboost
