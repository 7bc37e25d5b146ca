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

#ifndef CASR_NGRAM_LM_HPP_
#define CASR_NGRAM_LM_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace casr {

using TokenId = std::uint32_t;

inline constexpr TokenId kUnkId = 0;
inline constexpr TokenId kBosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr const char* kUnkWord = "<unk>";
inline constexpr const char* kBosWord = "<s>";
inline constexpr const char* kEosWord = "</s>";

/// ARPA sentinel for probability zero (the conventional -99).
inline constexpr double kArpaLogZero = -99.0;

/// Word <-> id table. Ids 0..2 are reserved for <unk>, <s>, </s>.
class LmVocab {
 public:
  LmVocab();
  TokenId intern(std::string_view word);
  std::optional<TokenId> find(std::string_view word) const;
  const std::string& word(TokenId id) const { return words_.at(id); }
  std::size_t size() const { return words_.size(); }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

using NGramKey = std::vector<TokenId>;

struct NGramKeyHash {
  std::size_t operator()(const NGramKey& k) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (TokenId id : k) {
      h ^= id;
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

template <typename V>
using NGramMap = std::unordered_map<NGramKey, V, NGramKeyHash>;

/// Raw n-gram counts. Sentences are padded with order-1 leading <s> tokens
/// and one trailing </s>; every k-gram with k <= order is counted.
struct NGramCounts {
  int order = 0;
  LmVocab vocab;
  std::vector<NGramMap<std::uint64_t>> grams;            // [k-1] -> counts
  std::vector<std::map<std::uint64_t, std::uint64_t>> count_of_counts;

  /// Checks the count hierarchy: for every observed (k-1)-gram h,
  /// count(h) >= sum over w of count(h w).
  void validate() const;
};

NGramCounts count_ngrams(const std::vector<std::string>& corpus, int order);

struct NGramEntry {
  double log10_prob = 0.0;     // -infinity for <s>-target entries
  double log10_backoff = 0.0;  // 0 when the entry is not a context
};

/// Backoff n-gram model with log10 probabilities and backoff weights
/// (ARPA conventions). Immutable after construction; safe to share across
/// decoder threads.
class NGramModel {
 public:
  NGramModel(int order, LmVocab vocab, std::vector<NGramMap<NGramEntry>> entries);

  int order() const { return order_; }
  const LmVocab& vocab() const { return vocab_; }
  const std::vector<NGramMap<NGramEntry>>& entries() const { return entries_; }

  /// Ids of every scoreable word: all vocabulary words plus <unk> and </s>,
  /// excluding <s> (which is never predicted).
  std::vector<TokenId> target_ids() const;

  /// Standard backoff query, log10. The context may be any length; only its
  /// last order-1 tokens are used. Out-of-vocabulary words score as <unk>.
  double score_word(const std::vector<TokenId>& context, TokenId word) const;
  double score_word(const std::vector<std::string>& context,
                    const std::string& word) const;

  /// Log10 probability of a sentence: each word scored in sequence with
  /// <s> padding, plus a final </s>.
  double score_sentence(const std::vector<std::string>& words) const;

  TokenId id_or_unk(std::string_view word) const;

  /// Orders (1-based) whose discounts fell back to the flat 0.75 value
  /// because the count-of-count statistics were degenerate.
  const std::vector<int>& fallback_orders() const { return fallback_orders_; }
  void set_fallback_orders(std::vector<int> orders) {
    fallback_orders_ = std::move(orders);
  }

 private:
  int order_;
  LmVocab vocab_;
  std::vector<NGramMap<NGramEntry>> entries_;  // [k-1] -> entries
  std::vector<int> fallback_orders_;
};

/// Interpolated modified Kneser-Ney estimation with three discounts per
/// order derived from count-of-counts. Degenerate count-of-counts (any of
/// n1..n4 empty at an order) fall back to a flat discount of 0.75 for that
/// order, with a warning on stderr. <unk> receives the unigram
/// interpolation mass; <s> is never predicted.
NGramModel estimate_kneser_ney(const NGramCounts& counts);

/// Perplexity of a line corpus: 10^(-total log10 / predicted tokens) where
/// each line predicts its words plus </s>. Throws on an empty corpus.
double perplexity(const NGramModel& model, const std::vector<std::string>& corpus);

// ARPA text interchange: "\data\" counts, per-order sections with lines
// "log10prob<TAB>tokens<TAB>log10backoff", "\end\". Zero-probability
// entries are written as -99.
void write_arpa(const NGramModel& model, const std::string& path);
NGramModel read_arpa(const std::string& path);

}  // namespace casr

#endif  // CASR_NGRAM_LM_HPP_
