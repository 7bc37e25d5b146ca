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

#ifndef CASR_CORPUS_IO_HPP_
#define CASR_CORPUS_IO_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace casr {

inline constexpr const char* kBlankToken = "<pad>";
inline constexpr const char* kBoundaryToken = "|";

/// Character vocabulary of the acoustic model output head. Token 0 is the
/// CTC blank ("<pad>"); the word boundary token ("|") renders as a space.
struct Vocabulary {
  std::vector<std::string> tokens;
  int blank_index = 0;
  int boundary_index = 0;
  std::map<std::string, int> token_index;  // filled by from_tokens/load

  int size() const { return static_cast<int>(tokens.size()); }

  /// One token per line, UTF-8; line 0 must be the blank literal "<pad>".
  static Vocabulary load(const std::string& path);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  /// Maps normalized text to label indices (space -> boundary token).
  /// Throws on characters with no vocabulary entry.
  std::vector<int> to_labels(std::string_view normalized_text) const;

  /// Renders label indices back to text. Boundary tokens become spaces;
  /// runs of spaces collapse and ends are trimmed so the result is
  /// normalized-text-compatible.
  std::string render(const std::vector<int>& labels) const;
};

/// T x V natural-log probabilities produced by an acoustic model.
struct EmissionMatrix {
  std::uint32_t frames = 0;      // T
  std::uint32_t vocab_size = 0;  // V
  std::vector<float> logprobs;   // row-major, frames * vocab_size

  float at(std::uint32_t t, std::uint32_t v) const {
    return logprobs[static_cast<size_t>(t) * vocab_size + v];
  }
  float& at(std::uint32_t t, std::uint32_t v) {
    return logprobs[static_cast<size_t>(t) * vocab_size + v];
  }

  /// Enforces the type invariants: T >= 1, entries <= 0, every row sums
  /// to 1 within 1e-4 after exponentiation. Throws casr::Error.
  void validate() const;
};

// "EMIS v1" binary layout: magic "EMIS", u32 version=1, u32 T, u32 V
// (little-endian), then T*V float32 little-endian, row-major.
EmissionMatrix read_emissions(const std::string& path);
void write_emissions(const EmissionMatrix& m, const std::string& path);

enum class Gender { kMale, kFemale };
enum class TeacherRace { kWhite, kAfricanAmerican, kAsian, kHispanic, kOther };
enum class Microphone { kNearField, kFarField };

std::string to_string(Gender g);
std::string to_string(TeacherRace r);
std::string to_string(Microphone m);
Gender parse_gender(std::string_view s);
TeacherRace parse_teacher_race(std::string_view s);
Microphone parse_microphone(std::string_view s);

/// One classroom row: teacher demographics, student percentages and the
/// microphone placement (NF near-field, FF far-field).
struct ClassroomMetadata {
  std::string classroom_id;
  Gender teacher_gender = Gender::kFemale;
  TeacherRace teacher_race = TeacherRace::kWhite;
  double pct_male = 0, pct_afam = 0, pct_asian = 0, pct_hispanic = 0,
         pct_white = 0, pct_other = 0;
  int n_students = 0;
  double pct_teacher_speech = 0;
  Microphone microphone = Microphone::kNearField;
};

struct UtteranceRecord {
  std::string utterance_id;
  std::string classroom_id;
  std::string emission_path;
  std::string reference;  // raw transcript text
  double start_s = 0;
  double end_s = 0;
};

struct Manifest {
  std::vector<UtteranceRecord> utterances;
  std::map<std::string, ClassroomMetadata> classrooms;
};

/// Classroom metadata CSV. Required header columns: classroom_id,
/// teacher_gender, teacher_race, pct_male, pct_afam, pct_asian,
/// pct_hispanic, pct_white, pct_other, n_students, pct_teacher_speech,
/// microphone.
std::map<std::string, ClassroomMetadata> parse_classroom_csv(const std::string& path);

/// Parses a JSONL manifest (one utterance object per line) plus its
/// classroom metadata sidecar. When metadata_csv_path is empty the sidecar
/// defaults to "<manifest stem>.classrooms.csv" next to the manifest; a
/// missing sidecar yields an empty classroom map (utterances referencing a
/// classroom then fail the dangling-reference check). All errors carry the
/// offending line number.
Manifest parse_manifest(const std::string& jsonl_path,
                        const std::string& metadata_csv_path = "");

void write_manifest(const Manifest& manifest, const std::string& jsonl_path,
                    const std::string& metadata_csv_path);

/// One timestamped transcript line prior to segmentation.
struct TranscriptLine {
  double start_s = 0;
  double end_s = 0;
  std::string text;
};

struct SegmentResult {
  std::vector<UtteranceRecord> chunks;
  std::vector<std::string> warnings;
};

/// Greedily merges consecutive transcript lines into chunks no longer than
/// max_seconds. Lines must be sorted by start time. A single line longer
/// than max_seconds becomes its own chunk with a warning; overlapping lines
/// warn and merge anyway. Chunk text is the space-joined line text.
SegmentResult segment_transcript(const std::vector<TranscriptLine>& lines,
                                 double max_seconds = 30.0);

// Plain text helpers shared by the CLI and pipeline.
std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::vector<std::string>& lines, const std::string& path);

}  // namespace casr

#endif  // CASR_CORPUS_IO_HPP_
