// Copyright 2026 CASR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "casr/ngram_lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "casr/util.hpp"

namespace casr {

// ---------------------------------------------------------------------------
// LmVocab

LmVocab::LmVocab() {
  words_ = {kUnkWord, kBosWord, kEosWord};
  for (TokenId i = 0; i < words_.size(); ++i) index_[words_[i]] = i;
}

TokenId LmVocab::intern(std::string_view word) {
  auto it = index_.find(std::string(word));
  if (it != index_.end()) return it->second;
  const TokenId id = static_cast<TokenId>(words_.size());
  words_.emplace_back(word);
  index_.emplace(words_.back(), id);
  return id;
}

std::optional<TokenId> LmVocab::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Counting

NGramCounts count_ngrams(const std::vector<std::string>& corpus, int order) {
  if (order < 1) throw Error("count_ngrams: order must be >= 1");
  NGramCounts counts;
  counts.order = order;
  counts.grams.resize(order);

  std::vector<TokenId> padded;
  for (const std::string& sentence : corpus) {
    const std::vector<std::string> words = split_ws(sentence);
    padded.clear();
    padded.insert(padded.end(), order - 1, kBosId);
    for (const auto& w : words) padded.push_back(counts.vocab.intern(w));
    padded.push_back(kEosId);
    for (int k = 1; k <= order; ++k) {
      if (padded.size() < static_cast<size_t>(k)) continue;
      for (size_t i = 0; i + k <= padded.size(); ++i) {
        NGramKey key(padded.begin() + i, padded.begin() + i + k);
        ++counts.grams[k - 1][key];
      }
    }
  }

  counts.count_of_counts.resize(order);
  for (int k = 1; k <= order; ++k) {
    for (const auto& [key, c] : counts.grams[k - 1]) {
      ++counts.count_of_counts[k - 1][c];
    }
  }
  return counts;
}

void NGramCounts::validate() const {
  for (int k = 2; k <= order; ++k) {
    NGramMap<std::uint64_t> extension_sum;
    for (const auto& [key, c] : grams[k - 1]) {
      NGramKey prefix(key.begin(), key.end() - 1);
      extension_sum[prefix] += c;
    }
    for (const auto& [prefix, total] : extension_sum) {
      auto it = grams[k - 2].find(prefix);
      const std::uint64_t have = it == grams[k - 2].end() ? 0 : it->second;
      if (have < total) {
        throw Error("ngram counts: history count below the sum of its extensions at order " +
                    std::to_string(k));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Model

NGramModel::NGramModel(int order, LmVocab vocab,
                       std::vector<NGramMap<NGramEntry>> entries)
    : order_(order), vocab_(std::move(vocab)), entries_(std::move(entries)) {
  if (order_ < 1 || entries_.size() != static_cast<size_t>(order_)) {
    throw Error("ngram model: inconsistent order");
  }
}

std::vector<TokenId> NGramModel::target_ids() const {
  std::vector<TokenId> ids;
  ids.reserve(vocab_.size());
  for (TokenId id = 0; id < vocab_.size(); ++id) {
    if (id != kBosId) ids.push_back(id);
  }
  return ids;
}

TokenId NGramModel::id_or_unk(std::string_view word) const {
  return vocab_.find(word).value_or(kUnkId);
}

double NGramModel::score_word(const std::vector<TokenId>& context, TokenId word) const {
  const size_t max_ctx = static_cast<size_t>(order_ - 1);
  size_t begin = context.size() > max_ctx ? context.size() - max_ctx : 0;

  double acc = 0.0;
  NGramKey key;
  while (true) {
    const size_t ctx_len = context.size() - begin;
    key.assign(context.begin() + begin, context.end());
    key.push_back(word);
    const auto& level = entries_[ctx_len];
    auto it = level.find(key);
    if (it != level.end()) return acc + it->second.log10_prob;
    if (ctx_len == 0) {
      // word itself unseen: fall back to <unk>
      key.assign({kUnkId});
      auto uit = entries_[0].find(key);
      if (uit == entries_[0].end()) {
        throw Error("ngram model: no <unk> unigram; cannot score unseen word");
      }
      return acc + uit->second.log10_prob;
    }
    // add the context's backoff weight (0 when the context is unseen) and
    // shorten the context from the left
    key.assign(context.begin() + begin, context.end());
    auto bit = entries_[ctx_len - 1].find(key);
    if (bit != entries_[ctx_len - 1].end()) acc += bit->second.log10_backoff;
    ++begin;
  }
}

double NGramModel::score_word(const std::vector<std::string>& context,
                              const std::string& word) const {
  std::vector<TokenId> ctx;
  ctx.reserve(context.size());
  for (const auto& w : context) ctx.push_back(id_or_unk(w));
  return score_word(ctx, id_or_unk(word));
}

double NGramModel::score_sentence(const std::vector<std::string>& words) const {
  std::vector<TokenId> ctx(static_cast<size_t>(order_ - 1), kBosId);
  double total = 0.0;
  auto advance = [&](TokenId id) {
    if (order_ == 1) return;
    ctx.push_back(id);
    if (ctx.size() > static_cast<size_t>(order_ - 1)) ctx.erase(ctx.begin());
  };
  for (const auto& w : words) {
    const TokenId id = id_or_unk(w);
    total += score_word(ctx, id);
    advance(id);
  }
  total += score_word(ctx, kEosId);
  return total;
}

double perplexity(const NGramModel& model, const std::vector<std::string>& corpus) {
  if (corpus.empty()) throw Error("perplexity: empty corpus");
  double total = 0.0;
  std::uint64_t tokens = 0;
  for (const auto& line : corpus) {
    const std::vector<std::string> words = split_ws(line);
    total += model.score_sentence(words);
    tokens += words.size() + 1;  // words plus </s>; <s> is not predicted
  }
  return std::pow(10.0, -total / static_cast<double>(tokens));
}

// ---------------------------------------------------------------------------
// Estimation

namespace {

struct Discounts {
  double d1 = 0.75, d2 = 0.75, d3 = 0.75;
};

double discount_for(const Discounts& d, std::uint64_t adjusted) {
  if (adjusted == 0) return 0.0;
  if (adjusted == 1) return d.d1;
  if (adjusted == 2) return d.d2;
  return d.d3;
}

}  // namespace

NGramModel estimate_kneser_ney(const NGramCounts& counts) {
  const int n = counts.order;
  if (n < 1) throw Error("estimate: order must be >= 1");
  if (counts.grams.empty() || counts.grams[0].empty()) {
    throw Error("estimate: empty counts");
  }

  // Adjusted counts: raw at the top order; lower orders use continuation
  // counts (number of distinct one-word left extensions), except n-grams
  // starting with <s>, which cannot be extended left and keep raw counts.
  std::vector<NGramMap<std::uint64_t>> adj(n);
  adj[n - 1] = counts.grams[n - 1];
  for (int k = n - 1; k >= 1; --k) {
    auto& out = adj[k - 1];
    for (const auto& [key, c] : counts.grams[k - 1]) {
      if (key[0] == kBosId) out[key] = c;
    }
    for (const auto& [key, c] : counts.grams[k]) {
      NGramKey suffix(key.begin() + 1, key.end());
      if (suffix[0] == kBosId) continue;
      ++out[suffix];
    }
  }

  // Discounts per order from count-of-counts over adjusted counts.
  std::vector<Discounts> disc(n);
  std::vector<int> fallback_orders;
  for (int k = 1; k <= n; ++k) {
    std::uint64_t n1 = 0, n2 = 0, n3 = 0, n4 = 0;
    for (const auto& [key, a] : adj[k - 1]) {
      if (key.back() == kBosId) continue;
      if (a == 1) ++n1;
      else if (a == 2) ++n2;
      else if (a == 3) ++n3;
      else if (a == 4) ++n4;
    }
    bool ok = n1 > 0 && n2 > 0 && n3 > 0 && n4 > 0;
    Discounts d;
    if (ok) {
      const double y = static_cast<double>(n1) / (n1 + 2.0 * n2);
      d.d1 = 1.0 - 2.0 * y * n2 / n1;
      d.d2 = 2.0 - 3.0 * y * n3 / n2;
      d.d3 = 3.0 - 4.0 * y * n4 / n3;
      ok = std::isfinite(d.d1) && std::isfinite(d.d2) && std::isfinite(d.d3) &&
           d.d1 > 0 && d.d1 <= 1.0 && d.d2 > 0 && d.d2 <= 2.0 && d.d3 > 0 &&
           d.d3 <= 3.0;
    }
    if (!ok) {
      d = Discounts{};
      fallback_orders.push_back(k);
      std::cerr << "estimate_kneser_ney: degenerate count-of-counts at order " << k
                << "; using flat discount 0.75\n";
    }
    disc[k - 1] = d;
  }

  std::vector<NGramMap<NGramEntry>> entries(n);

  // Unigram level. Targets are every token except <s>, plus <unk>.
  {
    std::vector<std::pair<TokenId, std::uint64_t>> targets;
    bool saw_unk = false;
    std::uint64_t total = 0, n1 = 0, n2 = 0, n3p = 0;
    for (const auto& [key, a] : adj[0]) {
      if (key[0] == kBosId) continue;
      if (key[0] == kUnkId) saw_unk = true;
      targets.emplace_back(key[0], a);
      total += a;
      if (a == 1) ++n1;
      else if (a == 2) ++n2;
      else ++n3p;
    }
    if (!saw_unk) targets.emplace_back(kUnkId, 0);
    if (total == 0) throw Error("estimate: no unigram mass");
    const Discounts& d = disc[0];
    const double gamma =
        (d.d1 * n1 + d.d2 * n2 + d.d3 * n3p) / static_cast<double>(total);
    const double uniform = 1.0 / static_cast<double>(targets.size());
    for (const auto& [w, a] : targets) {
      const double u = (static_cast<double>(a) - discount_for(d, a)) /
                       static_cast<double>(total);
      entries[0][{w}] = NGramEntry{std::log10(u + gamma * uniform), 0.0};
    }
    entries[0][{kBosId}] = NGramEntry{kArpaLogZero, 0.0};
  }

  // Higher orders, bottom-up so lower interpolated probabilities and the
  // context entries that carry backoff weights already exist.
  for (int k = 2; k <= n; ++k) {
    struct CtxStat {
      std::uint64_t den = 0, n1 = 0, n2 = 0, n3p = 0;
    };
    NGramMap<CtxStat> stats;
    for (const auto& [key, a] : adj[k - 1]) {
      if (key.back() == kBosId) continue;
      NGramKey h(key.begin(), key.end() - 1);
      CtxStat& st = stats[h];
      st.den += a;
      if (a == 1) ++st.n1;
      else if (a == 2) ++st.n2;
      else ++st.n3p;
    }

    const Discounts& d = disc[k - 1];
    NGramMap<double> gamma;
    gamma.reserve(stats.size());
    for (const auto& [h, st] : stats) {
      const double g = (d.d1 * st.n1 + d.d2 * st.n2 + d.d3 * st.n3p) /
                       static_cast<double>(st.den);
      gamma[h] = g;
      auto it = entries[k - 2].find(h);
      if (it == entries[k - 2].end()) {
        throw Error("estimate: internal error: context missing at order " +
                    std::to_string(k - 1));
      }
      it->second.log10_backoff = std::log10(g);
    }

    for (const auto& [key, a] : adj[k - 1]) {
      if (key.back() == kBosId) {
        entries[k - 1][key] = NGramEntry{kArpaLogZero, 0.0};
        continue;
      }
      NGramKey h(key.begin(), key.end() - 1);
      const CtxStat& st = stats.at(h);
      const double u = (static_cast<double>(a) - discount_for(d, a)) /
                       static_cast<double>(st.den);
      NGramKey lower(key.begin() + 1, key.end());
      auto lit = entries[k - 2].find(lower);
      if (lit == entries[k - 2].end()) {
        throw Error("estimate: internal error: lower-order entry missing at order " +
                    std::to_string(k - 1));
      }
      const double p = u + gamma.at(h) * std::pow(10.0, lit->second.log10_prob);
      entries[k - 1][key] = NGramEntry{std::log10(p), 0.0};
    }
  }

  NGramModel model(n, counts.vocab, std::move(entries));
  model.set_fallback_orders(std::move(fallback_orders));
  return model;
}

// ---------------------------------------------------------------------------
// ARPA serialization

void write_arpa(const NGramModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("arpa: cannot open for writing: " + path);

  const auto& levels = model.entries();
  out << "\\data\\\n";
  for (int k = 1; k <= model.order(); ++k) {
    out << "ngram " << k << "=" << levels[k - 1].size() << "\n";
  }

  char buf[64];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };

  for (int k = 1; k <= model.order(); ++k) {
    out << "\n\\" << k << "-grams:\n";
    // sort lexicographically by token strings for a deterministic layout
    std::vector<std::pair<std::vector<std::string>, const NGramEntry*>> rows;
    rows.reserve(levels[k - 1].size());
    for (const auto& [key, entry] : levels[k - 1]) {
      std::vector<std::string> words;
      words.reserve(key.size());
      for (TokenId id : key) words.push_back(model.vocab().word(id));
      rows.emplace_back(std::move(words), &entry);
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [words, entry] : rows) {
      out << fmt(entry->log10_prob) << '\t' << join(words, " ");
      if (k < model.order() && words.back() != kEosWord) {
        out << '\t' << fmt(entry->log10_backoff);
      }
      out << "\n";
    }
  }
  out << "\n\\end\\\n";
  if (!out) throw Error("arpa: write failed: " + path);
}

NGramModel read_arpa(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("arpa: cannot open " + path);

  std::string line;
  // locate \data\ header
  bool found_data = false;
  while (std::getline(in, line)) {
    if (trim(line) == "\\data\\") {
      found_data = true;
      break;
    }
    if (!trim(line).empty()) break;
  }
  if (!found_data) throw Error("arpa: " + path + ": missing \\data\\ header");

  std::vector<std::uint64_t> declared;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) break;
    if (t.rfind("ngram ", 0) != 0) throw Error("arpa: " + path + ": bad count line '" + t + "'");
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error("arpa: " + path + ": bad count line '" + t + "'");
    const int k = std::stoi(t.substr(6, eq - 6));
    if (k != static_cast<int>(declared.size()) + 1) {
      throw Error("arpa: " + path + ": non-contiguous ngram orders in \\data\\");
    }
    declared.push_back(std::stoull(t.substr(eq + 1)));
  }
  if (declared.empty()) throw Error("arpa: " + path + ": no ngram counts declared");
  const int order = static_cast<int>(declared.size());

  LmVocab vocab;
  std::vector<NGramMap<NGramEntry>> entries(order);

  int section = 0;  // current k, 0 = none
  std::uint64_t section_lines = 0;
  bool saw_end = false;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t == "\\end\\") {
      saw_end = true;
      break;
    }
    if (t.size() >= 9 && t[0] == '\\' && t.compare(t.size() - 7, 7, "-grams:") == 0) {
      if (section > 0 && section_lines != declared[section - 1]) {
        throw Error("arpa: " + path + ": \\data\\ declares " +
                    std::to_string(declared[section - 1]) + " " +
                    std::to_string(section) + "-grams but section lists " +
                    std::to_string(section_lines));
      }
      const int k = std::stoi(t.substr(1, t.size() - 8));
      if (k < 1 || k > order) throw Error("arpa: " + path + ": unexpected section " + t);
      if (k != section + 1) throw Error("arpa: " + path + ": out-of-order section " + t);
      section = k;
      section_lines = 0;
      continue;
    }
    if (section == 0) throw Error("arpa: " + path + ": entry outside any section");
    const std::vector<std::string> fields = split_ws(t);
    const size_t k = static_cast<size_t>(section);
    if (fields.size() != k + 1 && fields.size() != k + 2) {
      throw Error("arpa: " + path + ": malformed " + std::to_string(section) +
                  "-gram line '" + t + "'");
    }
    NGramEntry entry;
    try {
      entry.log10_prob = std::stod(fields[0]);
      if (fields.size() == k + 2) entry.log10_backoff = std::stod(fields[k + 1]);
    } catch (const std::exception&) {
      throw Error("arpa: " + path + ": bad number in line '" + t + "'");
    }
    NGramKey key;
    key.reserve(k);
    for (size_t i = 1; i <= k; ++i) key.push_back(vocab.intern(fields[i]));
    if (!entries[section - 1].emplace(std::move(key), entry).second) {
      throw Error("arpa: " + path + ": duplicate " + std::to_string(section) +
                  "-gram '" + t + "'");
    }
    ++section_lines;
  }
  if (!saw_end) throw Error("arpa: " + path + ": missing \\end\\");
  if (section != order) throw Error("arpa: " + path + ": missing sections");
  if (section_lines != declared[order - 1]) {
    throw Error("arpa: " + path + ": \\data\\ declares " +
                std::to_string(declared[order - 1]) + " " + std::to_string(order) +
                "-grams but section lists " + std::to_string(section_lines));
  }
  if (!vocab.find(kUnkWord) || !entries[0].count(NGramKey{kUnkId})) {
    throw Error("arpa: " + path + ": model lacks an <unk> unigram");
  }
  return NGramModel(order, std::move(vocab), std::move(entries));
}

}  // namespace casr
