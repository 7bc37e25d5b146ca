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

#include "casr/corpus_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "casr/util.hpp"

namespace casr {

namespace {

using nlohmann::json;

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.empty()) throw Error("vocabulary: empty token list");
  Vocabulary v;
  v.tokens = std::move(tokens);
  std::set<std::string> seen;
  for (const auto& t : v.tokens) {
    if (!seen.insert(t).second) throw Error("vocabulary: duplicate token '" + t + "'");
  }
  if (v.tokens[0] != kBlankToken) {
    throw Error(std::string("vocabulary: token 0 must be the blank literal '") +
                kBlankToken + "', got '" + v.tokens[0] + "'");
  }
  v.blank_index = 0;
  auto it = std::find(v.tokens.begin(), v.tokens.end(), kBoundaryToken);
  if (it == v.tokens.end()) {
    throw Error(std::string("vocabulary: missing word boundary token '") +
                kBoundaryToken + "'");
  }
  v.boundary_index = static_cast<int>(it - v.tokens.begin());
  for (int i = 0; i < v.size(); ++i) v.token_index[v.tokens[i]] = i;
  return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("vocabulary: cannot open " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

std::vector<int> Vocabulary::to_labels(std::string_view text) const {
  std::vector<int> out;
  out.reserve(text.size());
  for (char c : text) {
    if (c == ' ') {
      out.push_back(boundary_index);
      continue;
    }
    auto it = token_index.find(std::string(1, c));
    if (it == token_index.end()) {
      throw Error("vocabulary: character '" + std::string(1, c) +
                  "' has no vocabulary entry; normalize the text first");
    }
    out.push_back(it->second);
  }
  return out;
}

std::string Vocabulary::render(const std::vector<int>& labels) const {
  std::string raw;
  for (int l : labels) {
    if (l < 0 || l >= size()) throw Error("render: label index out of range");
    if (l == boundary_index) {
      raw.push_back(' ');
    } else if (l == blank_index) {
      throw Error("render: blank label in collapsed sequence");
    } else {
      raw += tokens[l];
    }
  }
  // collapse space runs, trim
  std::string out;
  bool pending = false;
  for (char c : raw) {
    if (c == ' ') {
      pending = !out.empty();
    } else {
      if (pending) out.push_back(' ');
      pending = false;
      out.push_back(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Emissions

void EmissionMatrix::validate() const {
  if (frames == 0) throw Error("emissions: T must be >= 1");
  if (vocab_size == 0) throw Error("emissions: V must be >= 1");
  if (logprobs.size() != static_cast<size_t>(frames) * vocab_size) {
    throw Error("emissions: payload size mismatch");
  }
  for (std::uint32_t t = 0; t < frames; ++t) {
    double sum = 0.0;
    for (std::uint32_t v = 0; v < vocab_size; ++v) {
      const float x = at(t, v);
      if (!(x <= 0.0f)) {
        throw Error("emissions: entry (" + std::to_string(t) + "," +
                    std::to_string(v) + ") is not a log-probability");
      }
      sum += std::exp(static_cast<double>(x));
    }
    if (std::abs(sum - 1.0) > 1e-4) {
      throw Error("emissions: row " + std::to_string(t) + " sums to " +
                  std::to_string(sum) + ", expected 1 within 1e-4");
    }
  }
}

namespace {

constexpr char kEmisMagic[4] = {'E', 'M', 'I', 'S'};
constexpr std::uint32_t kEmisVersion = 1;

void put_u32_le(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32_le(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw Error("emissions: truncated file while reading " + what);
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_emissions(const EmissionMatrix& m, const std::string& path) {
  m.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("emissions: cannot open for writing: " + path);
  out.write(kEmisMagic, 4);
  put_u32_le(out, kEmisVersion);
  put_u32_le(out, m.frames);
  put_u32_le(out, m.vocab_size);
  static_assert(sizeof(float) == 4);
  // assumes little-endian IEEE-754 host
  out.write(reinterpret_cast<const char*>(m.logprobs.data()),
            static_cast<std::streamsize>(m.logprobs.size() * sizeof(float)));
  if (!out) throw Error("emissions: write failed: " + path);
}

EmissionMatrix read_emissions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("emissions: cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4)) throw Error("emissions: truncated header in " + path);
  if (std::memcmp(magic, kEmisMagic, 4) != 0) {
    throw Error("emissions: bad magic in " + path);
  }
  const std::uint32_t version = get_u32_le(in, "version");
  if (version != kEmisVersion) {
    throw Error("emissions: unsupported version " + std::to_string(version));
  }
  EmissionMatrix m;
  m.frames = get_u32_le(in, "frame count");
  m.vocab_size = get_u32_le(in, "vocab size");
  const size_t n = static_cast<size_t>(m.frames) * m.vocab_size;
  m.logprobs.resize(n);
  if (!in.read(reinterpret_cast<char*>(m.logprobs.data()),
               static_cast<std::streamsize>(n * sizeof(float)))) {
    throw Error("emissions: truncated payload in " + path);
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Metadata enums

std::string to_string(Gender g) { return g == Gender::kMale ? "male" : "female"; }

std::string to_string(TeacherRace r) {
  switch (r) {
    case TeacherRace::kWhite: return "White";
    case TeacherRace::kAfricanAmerican: return "African-American";
    case TeacherRace::kAsian: return "Asian";
    case TeacherRace::kHispanic: return "Hispanic";
    case TeacherRace::kOther: return "Other";
  }
  return "Other";
}

std::string to_string(Microphone m) {
  return m == Microphone::kNearField ? "NF" : "FF";
}

Gender parse_gender(std::string_view s) {
  const std::string l = lower_ascii(trim(s));
  if (l == "male" || l == "m") return Gender::kMale;
  if (l == "female" || l == "f") return Gender::kFemale;
  throw Error("metadata: unknown gender '" + std::string(s) + "'");
}

TeacherRace parse_teacher_race(std::string_view s) {
  const std::string l = lower_ascii(trim(s));
  if (l == "white") return TeacherRace::kWhite;
  if (l == "afam" || l == "african-american" || l == "african american") {
    return TeacherRace::kAfricanAmerican;
  }
  if (l == "asian") return TeacherRace::kAsian;
  if (l == "hispanic") return TeacherRace::kHispanic;
  if (l == "other") return TeacherRace::kOther;
  throw Error("metadata: unknown teacher race '" + std::string(s) + "'");
}

Microphone parse_microphone(std::string_view s) {
  const std::string l = trim(s);
  if (l == "NF") return Microphone::kNearField;
  if (l == "FF") return Microphone::kFarField;
  throw Error("metadata: microphone must be NF or FF, got '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Classroom CSV

std::map<std::string, ClassroomMetadata> parse_classroom_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("metadata: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("metadata: empty CSV " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split(line, ',');
  std::map<std::string, int> col;
  for (size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = static_cast<int>(i);
  const char* required[] = {"classroom_id",  "teacher_gender", "teacher_race",
                            "pct_male",      "pct_afam",       "pct_asian",
                            "pct_hispanic",  "pct_white",      "pct_other",
                            "n_students",    "pct_teacher_speech", "microphone"};
  for (const char* c : required) {
    if (!col.count(c)) throw Error("metadata: " + path + " missing column '" + c + "'");
  }

  auto pct = [&](const std::vector<std::string>& f, const char* name, int lineno) {
    const double v = std::stod(f[col.at(name)]);
    if (v < 0.0 || v > 100.0) {
      throw Error("metadata: " + path + ":" + std::to_string(lineno) + ": " + name +
                  " out of [0,100]");
    }
    return v;
  };

  std::map<std::string, ClassroomMetadata> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> f = split(line, ',');
    if (f.size() < std::size(required)) {
      throw Error("metadata: " + path + ":" + std::to_string(lineno) +
                  ": expected " + std::to_string(std::size(required)) + " fields");
    }
    for (auto& x : f) x = trim(x);
    ClassroomMetadata md;
    try {
      md.classroom_id = f[col.at("classroom_id")];
      md.teacher_gender = parse_gender(f[col.at("teacher_gender")]);
      md.teacher_race = parse_teacher_race(f[col.at("teacher_race")]);
      md.pct_male = pct(f, "pct_male", lineno);
      md.pct_afam = pct(f, "pct_afam", lineno);
      md.pct_asian = pct(f, "pct_asian", lineno);
      md.pct_hispanic = pct(f, "pct_hispanic", lineno);
      md.pct_white = pct(f, "pct_white", lineno);
      md.pct_other = pct(f, "pct_other", lineno);
      md.n_students = std::stoi(f[col.at("n_students")]);
      md.pct_teacher_speech = std::stod(f[col.at("pct_teacher_speech")]);
      md.microphone = parse_microphone(f[col.at("microphone")]);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error("metadata: " + path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (md.classroom_id.empty()) {
      throw Error("metadata: " + path + ":" + std::to_string(lineno) +
                  ": empty classroom_id");
    }
    if (!out.emplace(md.classroom_id, md).second) {
      throw Error("metadata: " + path + ":" + std::to_string(lineno) +
                  ": duplicate classroom_id '" + md.classroom_id + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

Manifest parse_manifest(const std::string& jsonl_path,
                        const std::string& metadata_csv_path) {
  namespace fs = std::filesystem;
  std::ifstream in(jsonl_path);
  if (!in) throw Error("manifest: cannot open " + jsonl_path);

  Manifest m;
  std::string sidecar = metadata_csv_path;
  if (sidecar.empty()) {
    fs::path p(jsonl_path);
    p.replace_extension("");
    sidecar = p.string() + ".classrooms.csv";
  }
  if (fs::exists(sidecar)) {
    m.classrooms = parse_classroom_csv(sidecar);
  } else if (!metadata_csv_path.empty()) {
    throw Error("manifest: metadata CSV not found: " + sidecar);
  }

  std::set<std::string> ids;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw Error("manifest: " + jsonl_path + ":" + std::to_string(lineno) +
                  ": malformed JSON: " + e.what());
    }
    UtteranceRecord r;
    try {
      r.utterance_id = j.at("utterance_id").get<std::string>();
      r.classroom_id = j.at("classroom_id").get<std::string>();
      r.emission_path = j.at("emission_path").get<std::string>();
      r.reference = j.at("reference").get<std::string>();
      r.start_s = j.at("start_s").get<double>();
      r.end_s = j.at("end_s").get<double>();
    } catch (const std::exception& e) {
      throw Error("manifest: " + jsonl_path + ":" + std::to_string(lineno) +
                  ": malformed record: " + e.what());
    }
    if (r.end_s <= r.start_s) {
      throw Error("manifest: " + jsonl_path + ":" + std::to_string(lineno) +
                  ": end_s must be greater than start_s");
    }
    if (!ids.insert(r.utterance_id).second) {
      throw Error("manifest: " + jsonl_path + ":" + std::to_string(lineno) +
                  ": duplicate utterance_id '" + r.utterance_id + "'");
    }
    if (!m.classrooms.count(r.classroom_id)) {
      throw Error("manifest: " + jsonl_path + ":" + std::to_string(lineno) +
                  ": classroom_id '" + r.classroom_id +
                  "' not present in classroom metadata");
    }
    m.utterances.push_back(std::move(r));
  }
  return m;
}

void write_manifest(const Manifest& manifest, const std::string& jsonl_path,
                    const std::string& metadata_csv_path) {
  std::ofstream out(jsonl_path);
  if (!out) throw Error("manifest: cannot open for writing: " + jsonl_path);
  for (const auto& r : manifest.utterances) {
    json j{{"utterance_id", r.utterance_id}, {"classroom_id", r.classroom_id},
           {"emission_path", r.emission_path}, {"reference", r.reference},
           {"start_s", r.start_s},             {"end_s", r.end_s}};
    out << j.dump() << "\n";
  }
  std::ofstream csv(metadata_csv_path);
  if (!csv) throw Error("manifest: cannot open for writing: " + metadata_csv_path);
  csv << "classroom_id,teacher_gender,teacher_race,pct_male,pct_afam,pct_asian,"
         "pct_hispanic,pct_white,pct_other,n_students,pct_teacher_speech,"
         "microphone\n";
  for (const auto& [id, md] : manifest.classrooms) {
    csv << id << ',' << to_string(md.teacher_gender) << ',' << to_string(md.teacher_race)
        << ',' << md.pct_male << ',' << md.pct_afam << ',' << md.pct_asian << ','
        << md.pct_hispanic << ',' << md.pct_white << ',' << md.pct_other << ','
        << md.n_students << ',' << md.pct_teacher_speech << ','
        << to_string(md.microphone) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Segmentation

SegmentResult segment_transcript(const std::vector<TranscriptLine>& lines,
                                 double max_seconds) {
  if (max_seconds <= 0) throw Error("segment: max_seconds must be positive");
  SegmentResult result;
  if (lines.empty()) return result;

  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].start_s < lines[i - 1].start_s) {
      throw Error("segment: lines not sorted by start time (line " +
                  std::to_string(i) + ")");
    }
  }

  double chunk_start = 0, chunk_end = 0;
  std::vector<std::string> chunk_texts;
  bool overlong = false;

  auto flush = [&]() {
    if (chunk_texts.empty()) return;
    UtteranceRecord r;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "chunk-%04zu", result.chunks.size());
    r.utterance_id = buf;
    r.start_s = chunk_start;
    r.end_s = chunk_end;
    r.reference = join(chunk_texts, " ");
    result.chunks.push_back(std::move(r));
    if (overlong) {
      result.warnings.push_back("chunk " + std::string(buf) + " spans " +
                                format_fixed(chunk_end - chunk_start, 2) +
                                " s, over the " + format_fixed(max_seconds, 2) +
                                " s limit");
    }
    chunk_texts.clear();
    overlong = false;
  };

  for (size_t i = 0; i < lines.size(); ++i) {
    const TranscriptLine& ln = lines[i];
    if (i > 0 && ln.start_s < lines[i - 1].end_s) {
      result.warnings.push_back("line " + std::to_string(i) +
                                " overlaps the previous line; merged anyway");
    }
    if (chunk_texts.empty()) {
      chunk_start = ln.start_s;
      chunk_end = std::max(ln.start_s, ln.end_s);
      chunk_texts.push_back(ln.text);
      overlong = (chunk_end - chunk_start) > max_seconds;
      continue;
    }
    const double merged_end = std::max(chunk_end, ln.end_s);
    if (merged_end - chunk_start <= max_seconds) {
      chunk_end = merged_end;
      chunk_texts.push_back(ln.text);
    } else {
      flush();
      chunk_start = ln.start_s;
      chunk_end = std::max(ln.start_s, ln.end_s);
      chunk_texts.push_back(ln.text);
      overlong = (chunk_end - chunk_start) > max_seconds;
    }
  }
  flush();
  return result;
}

// ---------------------------------------------------------------------------
// Plain text helpers

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::vector<std::string>& lines, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  for (const auto& l : lines) out << l << "\n";
}

}  // namespace casr
