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

#ifndef CASR_PIPELINE_HPP_
#define CASR_PIPELINE_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "casr/corpus_io.hpp"
#include "casr/eval_report.hpp"
#include "casr/lm_beam_decode.hpp"

namespace casr {

/// Per-file and corpus-level WER for a set of utterance hypotheses.
/// Utterance references and hypotheses are normalized, concatenated per
/// classroom in manifest order, and scored per file; the corpus breakdown
/// accumulates the per-file edit counts.
struct CorpusScore {
  std::map<std::string, double> per_file_wer;
  std::map<std::string, WERBreakdown> per_file_breakdown;
  WERBreakdown corpus;

  double corpus_wer() const { return corpus.wer(); }
};

CorpusScore score_corpus(const Manifest& manifest,
                         const std::map<std::string, std::string>& hyp_by_utterance);

// Table renderers shared by the score/report subcommands and the pipeline.
std::string render_score_table(const CorpusScore& score);
std::string render_score_csv(const CorpusScore& score);
std::string render_bias_table(const BiasReport& report);
std::string render_bias_csv(const BiasReport& report);

struct DecodedUtterance {
  std::string utterance_id;
  std::string text;
  std::vector<DecodedHypothesis> nbest;  // beam decoding only
};

/// Decodes every utterance in the manifest, in manifest order. Relative
/// emission paths resolve against root_dir. beam == nullptr selects greedy
/// decoding; lm may be null for LM-free beam search. Utterances decode in
/// parallel across `threads` workers; results are deterministic regardless
/// of thread count.
std::vector<DecodedUtterance> decode_manifest(const Manifest& manifest,
                                              const std::string& root_dir,
                                              const Vocabulary& vocab,
                                              const NGramModel* lm,
                                              const DecoderConfig* beam, int threads);

/// Flat key = value pipeline configuration. Relative input paths resolve
/// against the config file directory; out_dir resolves against the working
/// directory.
struct PipelineConfig {
  std::string lm_corpus;   // raw transcript lines for LM training
  std::string name_table;  // required unless deanon_mode == "none"
  std::string deanon_mode = "none";
  std::uint64_t seed = 0;
  int lm_order = 3;
  std::string lm_arpa;  // prebuilt model; skips the lm-train stage
  std::string vocab;
  std::string eval_manifest;
  int beam_width = 100;
  double lm_weight = 0.5;
  double word_bonus = 1.5;
  int synth_frames_per_char = 2;
  double synth_sigma = 0.0;
  double synth_confusion = 0.0;
  std::vector<std::string> report_groups = {"teacher_race"};
  int threads = 1;
  std::string out_dir;

  static PipelineConfig parse(const std::string& path);
};

struct PipelineOutcome {
  double greedy_corpus_wer = 0;
  double beam_corpus_wer = 0;
};

/// Runs deanonymize -> normalize -> lm-train -> synth -> decode (greedy and
/// beam+LM) -> score -> report, writing every intermediate artifact under
/// out_dir. Stage failures abort with the stage name; reruns with the same
/// config and seeds produce byte-identical artifacts.
PipelineOutcome run_pipeline(const std::string& config_path, std::ostream& log);

}  // namespace casr

#endif  // CASR_PIPELINE_HPP_
