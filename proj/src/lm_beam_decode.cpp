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

#include "casr/lm_beam_decode.hpp"

#include <algorithm>
#include <iostream>
#include <unordered_map>

#include "casr/ctc_core.hpp"
#include "casr/util.hpp"

namespace casr {

namespace {

constexpr double kLn10 = 2.302585092994046;

struct PrefixHash {
  std::size_t operator()(const std::vector<int>& prefix) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (int v : prefix) {
      h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

// Beam state. The LM fields are a pure function of the prefix, so merged
// expansion paths agree on them by construction.
struct Hyp {
  double pb = kLogZero;          // ln P(prefix, ends in blank)
  double pnb = kLogZero;         // ln P(prefix, ends in non-blank)
  double lm_addend = 0.0;        // sum of weighted LM terms, natural log
  std::vector<TokenId> lm_ctx;   // last order-1 completed word ids
  std::string partial;           // characters since the last boundary

  double acoustic() const { return log_add(pb, pnb); }
  double rank_score() const { return acoustic() + lm_addend; }
};

using Beam = std::pair<std::vector<int>, Hyp>;

struct LmFusion {
  const NGramModel* model = nullptr;
  double alpha = 0.0;
  double beta = 0.0;

  // weighted ln-domain contribution of completing `word` after `ctx`
  double word_term(const std::vector<TokenId>& ctx, const std::string& word) const {
    return alpha * kLn10 * model->score_word(ctx, model->id_or_unk(word)) + beta;
  }

  void advance(std::vector<TokenId>& ctx, const std::string& word) const {
    if (model->order() == 1) return;
    ctx.push_back(model->id_or_unk(word));
    if (ctx.size() > static_cast<size_t>(model->order() - 1)) ctx.erase(ctx.begin());
  }
};

BeamDecodeResult greedy_result(const EmissionMatrix& m, const Vocabulary& vocab,
                               bool fell_back) {
  const std::vector<int> labels = collapse_path(argmax_path(m), vocab.blank_index);
  DecodedHypothesis hyp;
  hyp.text = vocab.render(labels);
  hyp.labels = labels;
  hyp.acoustic_logp = ctc_log_prob(m, labels, vocab.blank_index);
  hyp.fused_score = hyp.acoustic_logp;
  BeamDecodeResult res;
  res.best = hyp.text;
  res.nbest = {std::move(hyp)};
  res.fell_back_to_greedy = fell_back;
  return res;
}

}  // namespace

void check_lm_vocab_compat(const Vocabulary& vocab, const NGramModel& lm) {
  for (TokenId id = 0; id < lm.vocab().size(); ++id) {
    if (id == kUnkId || id == kBosId || id == kEosId) continue;
    const std::string& word = lm.vocab().word(id);
    try {
      vocab.to_labels(word);
    } catch (const Error& e) {
      throw Error("beam decode: LM word '" + word +
                  "' does not spell over the decoder vocabulary; was the LM "
                  "corpus normalized? (" + e.what() + ")");
    }
  }
}

BeamDecodeResult beam_search_decode(const EmissionMatrix& m, const Vocabulary& vocab,
                                    const NGramModel* lm, const DecoderConfig& config) {
  if (static_cast<int>(m.vocab_size) != vocab.size()) {
    throw Error("beam decode: emission V=" + std::to_string(m.vocab_size) +
                " does not match vocabulary size " + std::to_string(vocab.size()));
  }
  if (config.beam_width < 1) throw Error("beam decode: beam_width must be >= 1");
  if (!(config.token_floor < 0)) throw Error("beam decode: token_floor must be negative");
  if (config.lm_weight < 0) throw Error("beam decode: lm_weight must be nonnegative");
  if (lm) check_lm_vocab_compat(vocab, *lm);

  // A width-1 sum-merge beam does not reproduce the argmax path in general,
  // so the degenerate no-LM configuration delegates to greedy decoding.
  if (!lm && config.beam_width == 1) return greedy_result(m, vocab, false);

  LmFusion fusion{lm, config.lm_weight, config.word_bonus};
  const int blank = vocab.blank_index;
  const int boundary = vocab.boundary_index;

  std::vector<Beam> beams;
  {
    Hyp init;
    init.pb = 0.0;  // ln 1
    beams.emplace_back(std::vector<int>{}, std::move(init));
  }

  std::unordered_map<std::vector<int>, Hyp, PrefixHash> next;
  std::vector<int> extended;
  for (std::uint32_t t = 0; t < m.frames; ++t) {
    next.clear();
    for (const auto& [prefix, hyp] : beams) {
      const int last = prefix.empty() ? -1 : prefix.back();
      for (int v = 0; v < vocab.size(); ++v) {
        const double e = m.at(t, v);
        if (e < config.token_floor) continue;
        if (v == blank) {
          auto [it, inserted] = next.try_emplace(prefix);
          if (inserted) {
            it->second.lm_addend = hyp.lm_addend;
            it->second.lm_ctx = hyp.lm_ctx;
            it->second.partial = hyp.partial;
          }
          it->second.pb = log_add(it->second.pb, log_add(hyp.pb, hyp.pnb) + e);
          continue;
        }
        if (v == last) {
          // repeat without a separating blank stays on the same prefix
          auto [it, inserted] = next.try_emplace(prefix);
          if (inserted) {
            it->second.lm_addend = hyp.lm_addend;
            it->second.lm_ctx = hyp.lm_ctx;
            it->second.partial = hyp.partial;
          }
          it->second.pnb = log_add(it->second.pnb, hyp.pnb + e);
          if (hyp.pb == kLogZero) continue;  // blank-separated repeat unreachable
        }
        extended = prefix;
        extended.push_back(v);
        auto [it, inserted] = next.try_emplace(extended);
        if (inserted) {
          Hyp& fresh = it->second;
          fresh.lm_addend = hyp.lm_addend;
          fresh.lm_ctx = hyp.lm_ctx;
          fresh.partial = hyp.partial;
          if (v == boundary) {
            if (lm && !fresh.partial.empty()) {
              fresh.lm_addend += fusion.word_term(fresh.lm_ctx, fresh.partial);
              fusion.advance(fresh.lm_ctx, fresh.partial);
            }
            fresh.partial.clear();
          } else {
            fresh.partial += vocab.tokens[v];
          }
        }
        const double mass =
            v == last ? hyp.pb + e : log_add(hyp.pb, hyp.pnb) + e;
        it->second.pnb = log_add(it->second.pnb, mass);
      }
    }

    if (next.empty()) {
      std::cerr << "beam decode: all expansions pruned at frame " << t
                << "; falling back to greedy decoding\n";
      return greedy_result(m, vocab, true);
    }

    beams.clear();
    beams.reserve(next.size());
    for (auto& [prefix, hyp] : next) beams.emplace_back(prefix, std::move(hyp));
    std::sort(beams.begin(), beams.end(), [](const Beam& a, const Beam& b) {
      const double sa = a.second.rank_score(), sb = b.second.rank_score();
      if (sa != sb) return sa > sb;
      return a.first < b.first;
    });
    if (beams.size() > static_cast<size_t>(config.beam_width)) {
      beams.resize(static_cast<size_t>(config.beam_width));
    }
  }

  BeamDecodeResult res;
  res.nbest.reserve(beams.size());
  for (const auto& [prefix, hyp] : beams) {
    DecodedHypothesis out;
    out.labels = prefix;
    out.text = vocab.render(prefix);
    out.acoustic_logp = hyp.acoustic();
    out.fused_score = hyp.rank_score();
    if (lm && !hyp.partial.empty()) {
      // trailing partial word completes as <unk>
      out.fused_score += fusion.alpha * kLn10 *
                             lm->score_word(hyp.lm_ctx, kUnkId) +
                         fusion.beta;
    }
    res.nbest.push_back(std::move(out));
  }
  std::sort(res.nbest.begin(), res.nbest.end(),
            [](const DecodedHypothesis& a, const DecodedHypothesis& b) {
              if (a.fused_score != b.fused_score) return a.fused_score > b.fused_score;
              return a.labels < b.labels;
            });
  res.best = res.nbest.front().text;
  return res;
}

}  // namespace casr
