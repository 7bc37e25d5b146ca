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

#include "casr/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "casr/ctc_core.hpp"
#include "casr/deanonymize.hpp"
#include "casr/ngram_lm.hpp"
#include "casr/synth.hpp"
#include "casr/text_norm.hpp"
#include "casr/util.hpp"

namespace casr {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Scoring

CorpusScore score_corpus(const Manifest& manifest,
                         const std::map<std::string, std::string>& hyp_by_utterance) {
  // concatenate normalized text per classroom, in manifest order
  std::map<std::string, std::string> refs, hyps;
  for (const auto& utt : manifest.utterances) {
    auto hit = hyp_by_utterance.find(utt.utterance_id);
    if (hit == hyp_by_utterance.end()) {
      throw Error("score: no hypothesis for utterance '" + utt.utterance_id + "'");
    }
    std::string& ref = refs[utt.classroom_id];
    std::string& hyp = hyps[utt.classroom_id];
    const std::string nref = normalize(utt.reference);
    const std::string nhyp = normalize(hit->second);
    if (!nref.empty()) {
      if (!ref.empty()) ref += ' ';
      ref += nref;
    }
    if (!nhyp.empty()) {
      if (!hyp.empty()) hyp += ' ';
      hyp += nhyp;
    }
  }

  CorpusScore score;
  for (const auto& [file_id, ref] : refs) {
    const WERBreakdown b = compute_wer(ref, hyps[file_id]);
    score.per_file_breakdown[file_id] = b;
    score.per_file_wer[file_id] = b.wer();
    score.corpus.substitutions += b.substitutions;
    score.corpus.deletions += b.deletions;
    score.corpus.insertions += b.insertions;
    score.corpus.ref_words += b.ref_words;
  }
  return score;
}

// ---------------------------------------------------------------------------
// Table rendering

namespace {

std::string pad_left(const std::string& s, size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string render_score_table(const CorpusScore& score) {
  size_t idw = 4;
  for (const auto& [id, b] : score.per_file_breakdown) idw = std::max(idw, id.size());
  std::ostringstream out;
  out << pad_right("file", idw) << "  " << pad_left("ref", 8) << "  "
      << pad_left("sub", 6) << "  " << pad_left("del", 6) << "  " << pad_left("ins", 6)
      << "  " << pad_left("wer", 7) << "\n";
  for (const auto& [id, b] : score.per_file_breakdown) {
    out << pad_right(id, idw) << "  " << pad_left(std::to_string(b.ref_words), 8)
        << "  " << pad_left(std::to_string(b.substitutions), 6) << "  "
        << pad_left(std::to_string(b.deletions), 6) << "  "
        << pad_left(std::to_string(b.insertions), 6) << "  "
        << pad_left(format_fixed(b.wer(), 2), 7) << "\n";
  }
  const FoldReport fold = aggregate_folds(score.per_file_wer);
  out << pad_right("corpus", idw) << "  "
      << pad_left(std::to_string(score.corpus.ref_words), 8) << "  "
      << pad_left(std::to_string(score.corpus.substitutions), 6) << "  "
      << pad_left(std::to_string(score.corpus.deletions), 6) << "  "
      << pad_left(std::to_string(score.corpus.insertions), 6) << "  "
      << pad_left(format_fixed(score.corpus_wer(), 2), 7) << "\n";
  out << "mean(std): " << fold.formatted() << "\n";
  return out.str();
}

std::string render_score_csv(const CorpusScore& score) {
  std::ostringstream out;
  out << "file,ref_words,substitutions,deletions,insertions,wer\n";
  for (const auto& [id, b] : score.per_file_breakdown) {
    out << id << ',' << b.ref_words << ',' << b.substitutions << ',' << b.deletions
        << ',' << b.insertions << ',' << format_fixed(b.wer(), 2) << "\n";
  }
  out << "corpus," << score.corpus.ref_words << ',' << score.corpus.substitutions << ','
      << score.corpus.deletions << ',' << score.corpus.insertions << ','
      << format_fixed(score.corpus_wer(), 2) << "\n";
  return out.str();
}

std::string render_bias_table(const BiasReport& report) {
  size_t gw = 5;
  for (const auto& [g, m] : report.group_mean) gw = std::max(gw, g.size());
  std::ostringstream out;
  out << "group key: " << to_string(report.key) << "\n";
  out << pad_right("group", gw) << "  " << pad_left("files", 6) << "  "
      << pad_left("mean wer", 9) << "\n";
  for (const auto& [g, m] : report.group_mean) {
    out << pad_right(g, gw) << "  "
        << pad_left(std::to_string(report.group_size.at(g)), 6) << "  "
        << pad_left(format_fixed(m, 2), 9) << "\n";
  }
  out << "max pairwise gap: " << format_fixed(report.max_gap, 2) << "\n";
  return out.str();
}

std::string render_bias_csv(const BiasReport& report) {
  std::ostringstream out;
  out << "group,files,mean_wer\n";
  for (const auto& [g, m] : report.group_mean) {
    out << g << ',' << report.group_size.at(g) << ',' << format_fixed(m, 2) << "\n";
  }
  out << "max_gap,," << format_fixed(report.max_gap, 2) << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Decoding over a manifest

std::vector<DecodedUtterance> decode_manifest(const Manifest& manifest,
                                              const std::string& root_dir,
                                              const Vocabulary& vocab,
                                              const NGramModel* lm,
                                              const DecoderConfig* beam, int threads) {
  if (threads < 1) threads = 1;
  if (lm && beam) check_lm_vocab_compat(vocab, *lm);

  const size_t n = manifest.utterances.size();
  std::vector<DecodedUtterance> results(n);
  std::atomic<size_t> cursor{0};
  std::vector<std::string> worker_errors(threads);

  auto worker = [&](int wid) {
    try {
      while (true) {
        const size_t i = cursor.fetch_add(1);
        if (i >= n) break;
        const UtteranceRecord& utt = manifest.utterances[i];
        fs::path path(utt.emission_path);
        if (path.is_relative()) path = fs::path(root_dir) / path;
        const EmissionMatrix m = read_emissions(path.string());
        DecodedUtterance& out = results[i];
        out.utterance_id = utt.utterance_id;
        if (beam) {
          BeamDecodeResult r = beam_search_decode(m, vocab, lm, *beam);
          out.text = r.best;
          out.nbest = std::move(r.nbest);
        } else {
          out.text = greedy_decode(m, vocab);
        }
      }
    } catch (const std::exception& e) {
      worker_errors[wid] = e.what();
    }
  };

  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& err : worker_errors) {
    if (!err.empty()) throw Error(err);
  }
  return results;
}

// ---------------------------------------------------------------------------
// Pipeline configuration

PipelineConfig PipelineConfig::parse(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot open " + path);
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty()) return p;
    fs::path fp(p);
    return fp.is_absolute() ? p : (base / fp).string();
  };

  PipelineConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error("config: " + path + ":" + std::to_string(lineno) +
                  ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    try {
      if (key == "lm_corpus") cfg.lm_corpus = resolve(value);
      else if (key == "name_table") cfg.name_table = resolve(value);
      else if (key == "deanon_mode") cfg.deanon_mode = value;
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "lm_order") cfg.lm_order = std::stoi(value);
      else if (key == "lm_arpa") cfg.lm_arpa = resolve(value);
      else if (key == "vocab") cfg.vocab = resolve(value);
      else if (key == "eval_manifest") cfg.eval_manifest = resolve(value);
      else if (key == "beam_width") cfg.beam_width = std::stoi(value);
      else if (key == "lm_weight") cfg.lm_weight = std::stod(value);
      else if (key == "word_bonus") cfg.word_bonus = std::stod(value);
      else if (key == "synth_frames_per_char") cfg.synth_frames_per_char = std::stoi(value);
      else if (key == "synth_sigma") cfg.synth_sigma = std::stod(value);
      else if (key == "synth_confusion") cfg.synth_confusion = std::stod(value);
      else if (key == "report_groups") {
        cfg.report_groups.clear();
        for (const auto& g : split(value, ',')) {
          if (!trim(g).empty()) cfg.report_groups.push_back(trim(g));
        }
      } else if (key == "threads") cfg.threads = std::stoi(value);
      else if (key == "out_dir") cfg.out_dir = value;
      else throw Error("unknown key '" + key + "'");
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error("config: " + path + ":" + std::to_string(lineno) + ": bad value for '" +
                  key + "': " + e.what());
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

void validate_config(const PipelineConfig& cfg) {
  if (cfg.vocab.empty()) throw Error("vocab is required");
  if (cfg.eval_manifest.empty()) throw Error("eval_manifest is required");
  if (cfg.out_dir.empty()) throw Error("out_dir is required");
  if (cfg.lm_arpa.empty() && cfg.lm_corpus.empty()) {
    throw Error("beam decoding requires an LM: set lm_arpa or lm_corpus");
  }
  if (cfg.deanon_mode != "none") {
    parse_deanon_mode(cfg.deanon_mode);  // validates the value
    if (cfg.name_table.empty()) {
      throw Error("deanon_mode " + cfg.deanon_mode + " requires name_table");
    }
    if (!fs::exists(cfg.name_table)) {
      throw Error("name_table not found: " + cfg.name_table);
    }
  }
  if (!cfg.lm_corpus.empty() && !fs::exists(cfg.lm_corpus)) {
    throw Error("lm_corpus not found: " + cfg.lm_corpus);
  }
  if (!cfg.lm_arpa.empty() && !fs::exists(cfg.lm_arpa)) {
    throw Error("lm_arpa not found: " + cfg.lm_arpa);
  }
  if (!fs::exists(cfg.vocab)) throw Error("vocab not found: " + cfg.vocab);
  if (!fs::exists(cfg.eval_manifest)) {
    throw Error("eval_manifest not found: " + cfg.eval_manifest);
  }
  if (cfg.lm_order < 1) throw Error("lm_order must be >= 1");
  if (cfg.beam_width < 1) throw Error("beam_width must be >= 1");
  for (const auto& g : cfg.report_groups) parse_group_key(g);
}

template <typename Fn>
auto stage(const char* name, std::ostream& log, Fn&& fn) {
  log << "[" << name << "] ";
  log.flush();
  try {
    return fn();
  } catch (const std::exception& e) {
    throw Error(std::string("[") + name + "] " + e.what());
  }
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << content;
}

}  // namespace

PipelineOutcome run_pipeline(const std::string& config_path, std::ostream& log) {
  const PipelineConfig cfg = stage("config", log, [&] {
    PipelineConfig c = PipelineConfig::parse(config_path);
    validate_config(c);
    log << "ok\n";
    return c;
  });

  fs::create_directories(cfg.out_dir);
  const fs::path out_dir(cfg.out_dir);

  // --- deanonymize -> normalize ------------------------------------------
  std::vector<std::string> lm_lines;
  if (!cfg.lm_corpus.empty()) {
    lm_lines = read_lines(cfg.lm_corpus);
  }

  if (cfg.deanon_mode != "none" && !lm_lines.empty()) {
    stage("deanonymize", log, [&] {
      const NameTable table = NameTable::load(cfg.name_table);
      const DeanonMode mode = parse_deanon_mode(cfg.deanon_mode);
      std::ofstream audit((out_dir / "assignments.jsonl").string());
      if (!audit) throw Error("cannot open assignment audit for writing");
      for (size_t i = 0; i < lm_lines.size(); ++i) {
        DeanonResult r = deanonymize_transcript(
            lm_lines[i], table, derive_seed(cfg.seed, i), mode);
        json ids = json::array();
        for (const auto& [key, choice] : r.assignment) {
          ids.push_back({{"honorific", to_string(key.honorific)},
                         {"initial", std::string(1, key.initial)},
                         {"name", choice.name},
                         {"gender", to_string(choice.gender)},
                         {"race", to_string(choice.race)}});
        }
        audit << json{{"line", i}, {"identities", ids}}.dump() << "\n";
        lm_lines[i] = std::move(r.text);
      }
      write_lines(lm_lines, (out_dir / "deanonymized.txt").string());
      log << lm_lines.size() << " transcript lines\n";
      return 0;
    });
  }

  if (!lm_lines.empty()) {
    stage("normalize", log, [&] {
      for (auto& line : lm_lines) line = normalize(line);
      write_lines(lm_lines, (out_dir / "lm_corpus.norm.txt").string());
      log << lm_lines.size() << " lines\n";
      return 0;
    });
  }

  // --- lm-train -----------------------------------------------------------
  const NGramModel lm = stage("lm-train", log, [&] {
    if (!cfg.lm_arpa.empty()) {
      NGramModel model = read_arpa(cfg.lm_arpa);
      log << "loaded " << cfg.lm_arpa << " (order " << model.order() << ")\n";
      return model;
    }
    const NGramCounts counts = count_ngrams(lm_lines, cfg.lm_order);
    NGramModel model = estimate_kneser_ney(counts);
    write_arpa(model, (out_dir / "model.arpa").string());
    log << "order " << model.order() << ", " << counts.grams[0].size()
        << " unigram types\n";
    return model;
  });

  // --- synth ---------------------------------------------------------------
  const Vocabulary vocab = Vocabulary::load(cfg.vocab);
  Manifest manifest = stage("synth", log, [&] {
    Manifest mf = parse_manifest(cfg.eval_manifest);
    fs::create_directories(out_dir / "emis");
    SynthConfig synth_cfg;
    synth_cfg.frames_per_char = cfg.synth_frames_per_char;
    synth_cfg.noise_sigma = cfg.synth_sigma;
    synth_cfg.confusion_rate = cfg.synth_confusion;
    for (auto& utt : mf.utterances) {
      synth_cfg.seed = derive_seed(cfg.seed, fnv1a64(utt.utterance_id));
      const EmissionMatrix m =
          synth_emissions(normalize(utt.reference), vocab, synth_cfg);
      utt.emission_path = (fs::path("emis") / (utt.utterance_id + ".emis")).string();
      write_emissions(m, (out_dir / utt.emission_path).string());
    }
    write_manifest(mf, (out_dir / "eval_run.jsonl").string(),
                   (out_dir / "eval_run.classrooms.csv").string());
    log << mf.utterances.size() << " utterances, " << mf.classrooms.size()
        << " classrooms\n";
    return mf;
  });

  // --- decode --------------------------------------------------------------
  auto write_hyps = [&](const std::vector<DecodedUtterance>& hyps,
                        const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    for (const auto& h : hyps) {
      out << json{{"utterance_id", h.utterance_id}, {"text", h.text}}.dump() << "\n";
    }
  };

  const std::vector<DecodedUtterance> greedy_hyps = stage("decode-greedy", log, [&] {
    auto hyps = decode_manifest(manifest, cfg.out_dir, vocab, nullptr, nullptr,
                                cfg.threads);
    write_hyps(hyps, (out_dir / "hyp_greedy.jsonl").string());
    log << hyps.size() << " utterances\n";
    return hyps;
  });

  const std::vector<DecodedUtterance> beam_hyps = stage("decode-beam", log, [&] {
    DecoderConfig dc;
    dc.beam_width = cfg.beam_width;
    dc.lm_weight = cfg.lm_weight;
    dc.word_bonus = cfg.word_bonus;
    auto hyps = decode_manifest(manifest, cfg.out_dir, vocab, &lm, &dc, cfg.threads);
    write_hyps(hyps, (out_dir / "hyp_beam.jsonl").string());
    log << hyps.size() << " utterances (beam " << dc.beam_width << ")\n";
    return hyps;
  });

  // --- score ---------------------------------------------------------------
  auto to_map = [](const std::vector<DecodedUtterance>& hyps) {
    std::map<std::string, std::string> m;
    for (const auto& h : hyps) m[h.utterance_id] = h.text;
    return m;
  };

  const CorpusScore greedy_score = stage("score", log, [&] {
    CorpusScore gs = score_corpus(manifest, to_map(greedy_hyps));
    write_text((out_dir / "score_greedy.txt").string(), render_score_table(gs));
    write_text((out_dir / "score_greedy.csv").string(), render_score_csv(gs));
    log << "greedy corpus WER " << format_fixed(gs.corpus_wer(), 2) << "\n";
    return gs;
  });

  const CorpusScore beam_score = stage("score-beam", log, [&] {
    CorpusScore bs = score_corpus(manifest, to_map(beam_hyps));
    write_text((out_dir / "score_beam.txt").string(), render_score_table(bs));
    write_text((out_dir / "score_beam.csv").string(), render_score_csv(bs));
    log << "beam+LM corpus WER " << format_fixed(bs.corpus_wer(), 2) << "\n";
    return bs;
  });

  // --- report ----------------------------------------------------------------
  stage("report", log, [&] {
    for (const auto& g : cfg.report_groups) {
      const BiasReport rep =
          bias_report(manifest, beam_score.per_file_wer, parse_group_key(g));
      write_text((out_dir / ("report_" + g + ".txt")).string(),
                 render_bias_table(rep));
      write_text((out_dir / ("report_" + g + ".csv")).string(), render_bias_csv(rep));
    }
    log << cfg.report_groups.size() << " grouping(s)\n";
    return 0;
  });

  // --- summary ----------------------------------------------------------------
  PipelineOutcome outcome;
  outcome.greedy_corpus_wer = greedy_score.corpus_wer();
  outcome.beam_corpus_wer = beam_score.corpus_wer();
  {
    std::ostringstream s;
    const FoldReport gf = aggregate_folds(greedy_score.per_file_wer);
    const FoldReport bf = aggregate_folds(beam_score.per_file_wer);
    s << "files: " << greedy_score.per_file_wer.size() << "\n"
      << "utterances: " << manifest.utterances.size() << "\n"
      << "greedy corpus WER: " << format_fixed(outcome.greedy_corpus_wer, 2) << "\n"
      << "beam+LM corpus WER: " << format_fixed(outcome.beam_corpus_wer, 2) << "\n"
      << "improvement: "
      << format_fixed(outcome.greedy_corpus_wer - outcome.beam_corpus_wer, 2) << "\n"
      << "greedy mean(std): " << gf.formatted() << "\n"
      << "beam+LM mean(std): " << bf.formatted() << "\n";
    write_text((out_dir / "summary.txt").string(), s.str());
    log << "[summary] improvement "
        << format_fixed(outcome.greedy_corpus_wer - outcome.beam_corpus_wer, 2)
        << " WER points\n";
  }
  return outcome;
}

}  // namespace casr
