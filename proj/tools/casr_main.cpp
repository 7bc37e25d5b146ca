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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "casr/corpus_io.hpp"
#include "casr/ctc_core.hpp"
#include "casr/deanonymize.hpp"
#include "casr/eval_report.hpp"
#include "casr/lm_beam_decode.hpp"
#include "casr/ngram_lm.hpp"
#include "casr/pipeline.hpp"
#include "casr/synth.hpp"
#include "casr/text_norm.hpp"
#include "casr/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> read_stdin_lines() {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(std::cin, line)) lines.push_back(line);
  return lines;
}

std::map<std::string, std::string> load_hypotheses(const std::string& path) {
  std::map<std::string, std::string> hyps;
  std::ifstream in(path);
  if (!in) throw casr::Error("cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (casr::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      hyps[j.at("utterance_id").get<std::string>()] = j.at("text").get<std::string>();
    } catch (const std::exception& e) {
      throw casr::Error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return hyps;
}

void write_or_print(const std::string& content, const std::string& path) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) throw casr::Error("cannot open for writing: " + path);
  out << content;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"classroom ASR decoding and evaluation toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int threads = 1;
  app.add_option("--seed", seed, "base random seed")->capture_default_str();
  app.add_option("--threads", threads, "worker threads for per-utterance stages")
      ->capture_default_str();

  // normalize ---------------------------------------------------------------
  app.add_subcommand("normalize",
                     "normalize text from standard input, one line per line");

  // deanonymize ---------------------------------------------------------------
  auto* deanon = app.add_subcommand(
      "deanonymize", "replace anonymized mentions with sampled names");
  std::string deanon_table, deanon_mode = "race-aware", deanon_out_dir;
  std::vector<std::string> deanon_inputs;
  deanon->add_option("--table", deanon_table, "name table CSV")->required();
  deanon->add_option("--mode", deanon_mode, "race-aware or gender-aware")
      ->capture_default_str();
  deanon->add_option("--out-dir", deanon_out_dir, "output directory")->required();
  deanon->add_option("files", deanon_inputs, "transcript files")->required();

  // lm-train ---------------------------------------------------------------
  auto* lm_train = app.add_subcommand(
      "lm-train", "train a Kneser-Ney n-gram model on normalized text");
  int lm_order = 5;
  std::string lm_out, lm_input;
  lm_train->add_option("--order", lm_order, "n-gram order")->capture_default_str();
  lm_train->add_option("--out", lm_out, "output ARPA path")->required();
  lm_train->add_option("corpus", lm_input,
                       "normalized corpus file (default: standard input)");

  // lm-score ---------------------------------------------------------------
  auto* lm_score = app.add_subcommand(
      "lm-score", "perplexity of standard input under an ARPA model");
  std::string lm_model;
  lm_score->add_option("--model", lm_model, "ARPA model path")->required();

  // decode ---------------------------------------------------------------
  auto* decode = app.add_subcommand("decode", "decode emission matrices to text");
  std::string dec_vocab, dec_manifest, dec_lm, dec_out, dec_root;
  bool dec_greedy = false;
  int dec_beam = 100, dec_nbest = 1;
  double dec_alpha = 0.5, dec_beta = 1.5;
  decode->add_option("--vocab", dec_vocab, "vocabulary file")->required();
  decode->add_option("--manifest", dec_manifest, "utterance manifest JSONL")->required();
  decode->add_flag("--greedy", dec_greedy, "best-path decoding (no beam, no LM)");
  decode->add_option("--beam", dec_beam, "beam width")->capture_default_str();
  decode->add_option("--lm", dec_lm, "ARPA model for shallow fusion");
  decode->add_option("--alpha", dec_alpha, "LM weight")->capture_default_str();
  decode->add_option("--beta", dec_beta, "word insertion bonus")->capture_default_str();
  decode->add_option("--nbest", dec_nbest, "hypotheses per utterance")
      ->capture_default_str();
  decode->add_option("--root", dec_root,
                     "directory for relative emission paths (default: manifest dir)");
  decode->add_option("--out", dec_out, "output JSONL (default: standard output)");

  // score ---------------------------------------------------------------
  auto* score = app.add_subcommand("score", "WER of hypotheses against a manifest");
  std::string score_manifest, score_hyp, score_csv;
  score->add_option("--manifest", score_manifest, "utterance manifest JSONL")->required();
  score->add_option("--hyp", score_hyp, "hypothesis JSONL")->required();
  score->add_option("--csv", score_csv, "also write the table as CSV to this path");

  // report ---------------------------------------------------------------
  auto* report = app.add_subcommand("report", "per-group WER bias breakdown");
  std::string rep_manifest, rep_hyp, rep_group = "teacher_race", rep_csv;
  report->add_option("--manifest", rep_manifest, "utterance manifest JSONL")->required();
  report->add_option("--hyp", rep_hyp, "hypothesis JSONL")->required();
  report->add_option("--group", rep_group,
                     "teacher_race, teacher_gender or microphone")
      ->capture_default_str();
  report->add_option("--csv", rep_csv, "also write the table as CSV to this path");

  // synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand(
      "synth", "generate synthetic emissions for manifest references");
  std::string synth_vocab, synth_manifest, synth_root;
  int synth_fpc = 2;
  double synth_sigma = 0.0, synth_rho = 0.0;
  synth->add_option("--vocab", synth_vocab, "vocabulary file")->required();
  synth->add_option("--manifest", synth_manifest, "utterance manifest JSONL")->required();
  synth->add_option("--frames-per-char", synth_fpc, "frames per character [1,3]")
      ->capture_default_str();
  synth->add_option("--sigma", synth_sigma, "logit noise stddev")->capture_default_str();
  synth->add_option("--rho", synth_rho, "peak confusion probability")
      ->capture_default_str();
  synth->add_option("--root", synth_root,
                    "directory for relative emission paths (default: manifest dir)");

  // run ---------------------------------------------------------------
  auto* run = app.add_subcommand("run", "run the full pipeline from a config file");
  std::string run_config;
  run->add_option("--config,config", run_config, "pipeline config file")->required();

  CLI11_PARSE(app, argc, argv);
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    if (sub == "normalize") {
      std::string line;
      while (std::getline(std::cin, line)) std::cout << casr::normalize(line) << "\n";
      return 0;
    }

    if (sub == "deanonymize") {
      const casr::NameTable table = casr::NameTable::load(deanon_table);
      const casr::DeanonMode mode = casr::parse_deanon_mode(deanon_mode);
      fs::create_directories(deanon_out_dir);
      std::ofstream audit(fs::path(deanon_out_dir) / "assignments.jsonl");
      if (!audit) throw casr::Error("cannot open assignment audit for writing");
      for (size_t fi = 0; fi < deanon_inputs.size(); ++fi) {
        const auto lines = casr::read_lines(deanon_inputs[fi]);
        std::vector<std::string> out_lines;
        out_lines.reserve(lines.size());
        json file_ids = json::array();
        for (size_t i = 0; i < lines.size(); ++i) {
          casr::DeanonResult r = casr::deanonymize_transcript(
              lines[i], table,
              casr::derive_seed(seed, casr::fnv1a64(deanon_inputs[fi]) ^ i), mode);
          for (const auto& [key, choice] : r.assignment) {
            file_ids.push_back({{"line", i},
                                {"honorific", casr::to_string(key.honorific)},
                                {"initial", std::string(1, key.initial)},
                                {"name", choice.name},
                                {"gender", casr::to_string(choice.gender)},
                                {"race", casr::to_string(choice.race)}});
          }
          out_lines.push_back(std::move(r.text));
        }
        const std::string out_path =
            (fs::path(deanon_out_dir) / fs::path(deanon_inputs[fi]).filename()).string();
        casr::write_lines(out_lines, out_path);
        audit << json{{"file", deanon_inputs[fi]}, {"output", out_path},
                      {"identities", file_ids}}
                     .dump()
              << "\n";
      }
      return 0;
    }

    if (sub == "lm-train") {
      const std::vector<std::string> corpus =
          lm_input.empty() ? read_stdin_lines() : casr::read_lines(lm_input);
      // inputs must already be normalized; verify cheaply via idempotence
      for (size_t i = 0; i < corpus.size(); ++i) {
        if (casr::normalize(corpus[i]) != corpus[i]) {
          throw casr::Error("lm-train: line " + std::to_string(i + 1) +
                            " is not normalized text; run `normalize` first");
        }
      }
      const casr::NGramCounts counts = casr::count_ngrams(corpus, lm_order);
      const casr::NGramModel model = casr::estimate_kneser_ney(counts);
      casr::write_arpa(model, lm_out);
      std::cerr << "wrote " << lm_out << " (order " << model.order() << ")\n";
      return 0;
    }

    if (sub == "lm-score") {
      const casr::NGramModel model = casr::read_arpa(lm_model);
      const std::vector<std::string> corpus = read_stdin_lines();
      double total_log10 = 0.0;
      std::uint64_t tokens = 0;
      for (const auto& line : corpus) {
        const auto words = casr::split_ws(line);
        const double s = model.score_sentence(words);
        std::cout << casr::format_fixed(s, 4) << "\t" << line << "\n";
        total_log10 += s;
        tokens += words.size() + 1;
      }
      const double ppl = casr::perplexity(model, corpus);
      std::cout << "sentences: " << corpus.size() << "\n"
                << "tokens (incl </s>): " << tokens << "\n"
                << "total log10 prob: " << casr::format_fixed(total_log10, 4) << "\n"
                << "perplexity: " << casr::format_fixed(ppl, 4) << "\n";
      return 0;
    }

    if (sub == "decode") {
      const casr::Vocabulary vocab = casr::Vocabulary::load(dec_vocab);
      const casr::Manifest manifest = casr::parse_manifest(dec_manifest);
      const std::string root =
          dec_root.empty() ? fs::path(dec_manifest).parent_path().string() : dec_root;

      std::optional<casr::NGramModel> lm;
      if (!dec_lm.empty()) lm = casr::read_arpa(dec_lm);
      if (dec_greedy && lm) {
        throw casr::Error("decode: --greedy does not take an LM");
      }
      casr::DecoderConfig dc;
      dc.beam_width = dec_beam;
      dc.lm_weight = dec_alpha;
      dc.word_bonus = dec_beta;

      const auto hyps = casr::decode_manifest(
          manifest, root, vocab, lm ? &*lm : nullptr, dec_greedy ? nullptr : &dc,
          threads);

      std::ostringstream out;
      for (const auto& h : hyps) {
        json j{{"utterance_id", h.utterance_id}, {"text", h.text}};
        if (!dec_greedy && dec_nbest > 1) {
          json nbest = json::array();
          const size_t n = std::min<size_t>(dec_nbest, h.nbest.size());
          for (size_t i = 0; i < n; ++i) {
            nbest.push_back({{"text", h.nbest[i].text},
                             {"fused_score", h.nbest[i].fused_score},
                             {"acoustic_logp", h.nbest[i].acoustic_logp}});
          }
          j["nbest"] = nbest;
        }
        out << j.dump() << "\n";
      }
      write_or_print(out.str(), dec_out);
      return 0;
    }

    if (sub == "score") {
      const casr::Manifest manifest = casr::parse_manifest(score_manifest);
      const auto hyps = load_hypotheses(score_hyp);
      const casr::CorpusScore cs = casr::score_corpus(manifest, hyps);
      std::cout << casr::render_score_table(cs);
      if (!score_csv.empty()) write_or_print(casr::render_score_csv(cs), score_csv);
      return 0;
    }

    if (sub == "report") {
      const casr::Manifest manifest = casr::parse_manifest(rep_manifest);
      const auto hyps = load_hypotheses(rep_hyp);
      const casr::CorpusScore cs = casr::score_corpus(manifest, hyps);
      const casr::BiasReport rep =
          casr::bias_report(manifest, cs.per_file_wer, casr::parse_group_key(rep_group));
      std::cout << casr::render_bias_table(rep);
      if (!rep_csv.empty()) write_or_print(casr::render_bias_csv(rep), rep_csv);
      return 0;
    }

    if (sub == "synth") {
      const casr::Vocabulary vocab = casr::Vocabulary::load(synth_vocab);
      const casr::Manifest manifest = casr::parse_manifest(synth_manifest);
      const std::string root = synth_root.empty()
                                   ? fs::path(synth_manifest).parent_path().string()
                                   : synth_root;
      casr::SynthConfig cfg;
      cfg.frames_per_char = synth_fpc;
      cfg.noise_sigma = synth_sigma;
      cfg.confusion_rate = synth_rho;
      for (const auto& utt : manifest.utterances) {
        cfg.seed = casr::derive_seed(seed, casr::fnv1a64(utt.utterance_id));
        const casr::EmissionMatrix m =
            casr::synth_emissions(casr::normalize(utt.reference), vocab, cfg);
        fs::path path(utt.emission_path);
        if (path.is_relative()) path = fs::path(root) / path;
        fs::create_directories(path.parent_path());
        casr::write_emissions(m, path.string());
      }
      std::cerr << "wrote " << manifest.utterances.size() << " emission files\n";
      return 0;
    }

    if (sub == "run") {
      casr::run_pipeline(run_config, std::cout);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "[" << sub << "] error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
