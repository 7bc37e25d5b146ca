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

#ifndef CASR_LM_BEAM_DECODE_HPP_
#define CASR_LM_BEAM_DECODE_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "casr/corpus_io.hpp"
#include "casr/ngram_lm.hpp"

namespace casr {

struct DecoderConfig {
  int beam_width = 100;
  double lm_weight = 0.5;                 // alpha, applied to ln P(word|ctx)
  double word_bonus = 1.5;                // beta, added per completed word
  double token_floor = std::log(1e-5);    // skip expansions below this ln prob
};

struct DecodedHypothesis {
  std::string text;
  std::vector<int> labels;   // CTC label prefix (no blanks)
  double acoustic_logp = 0;  // ln of the beam-accumulated prefix probability
  double fused_score = 0;    // acoustic_logp plus weighted LM terms
};

struct BeamDecodeResult {
  std::string best;
  std::vector<DecodedHypothesis> nbest;  // sorted by fused_score, descending
  bool fell_back_to_greedy = false;      // beam underflow fallback
};

/// Character-level CTC prefix beam search with optional word-level shallow
/// fusion. Hypotheses that collapse to the same prefix are merged by
/// log-sum-exp. Whenever the boundary token completes a word w after LM
/// context h, lm_weight * ln P(w|h) + word_bonus is added to the fused
/// score; the final ranking scores any trailing partial word as <unk>.
///
/// With no LM and beam_width 1 the search delegates to greedy decoding
/// (per-frame argmax), which a width-1 sum-merge beam does not reproduce in
/// general. If a frame prunes every expansion below token_floor, the
/// decoder falls back to the greedy result with a warning.
BeamDecodeResult beam_search_decode(const EmissionMatrix& m, const Vocabulary& vocab,
                                    const NGramModel* lm, const DecoderConfig& config);

/// Verifies that every LM vocabulary word spells over the decoder
/// vocabulary (so completed words can actually be produced). Throws on
/// mismatch. Called by beam_search_decode when an LM is present.
void check_lm_vocab_compat(const Vocabulary& vocab, const NGramModel& lm);

}  // namespace casr

#endif  // CASR_LM_BEAM_DECODE_HPP_
