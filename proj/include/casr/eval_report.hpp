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

#ifndef CASR_EVAL_REPORT_HPP_
#define CASR_EVAL_REPORT_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "casr/corpus_io.hpp"

namespace casr {

/// Word-level edit counts. wer() may exceed 100 through insertions.
struct WERBreakdown {
  std::uint64_t substitutions = 0;
  std::uint64_t deletions = 0;
  std::uint64_t insertions = 0;
  std::uint64_t ref_words = 0;

  double wer() const {
    return 100.0 *
           static_cast<double>(substitutions + deletions + insertions) /
           static_cast<double>(ref_words);
  }
};

/// Minimal word-level edit distance with unit costs. Both inputs must
/// already be normalized; an empty reference is an error. Tie-breaks among
/// minimal alignments may shift the S/D/I split but never the total.
WERBreakdown compute_wer(const std::string& reference, const std::string& hypothesis);

/// Cross-validation aggregate in "MEAN(STD)" form. std is the sample
/// (n-1) standard deviation and is absent for a single file.
struct FoldReport {
  std::map<std::string, double> per_file;
  double mean = 0.0;
  std::optional<double> stddev;

  /// "17.71(5.07)" with two decimals, or just "17.71" when std is absent.
  std::string formatted() const;
};

FoldReport aggregate_folds(const std::map<std::string, double>& per_file);

enum class GroupKey { kTeacherRace, kTeacherGender, kMicrophone };

GroupKey parse_group_key(std::string_view s);
std::string to_string(GroupKey k);

/// Mean WER per demographic/microphone group plus the largest pairwise gap.
struct BiasReport {
  GroupKey key = GroupKey::kTeacherRace;
  std::map<std::string, double> group_mean;
  std::map<std::string, int> group_size;
  double max_gap = 0.0;
};

/// Groups per-file WERs by classroom metadata. Every file id must resolve
/// to a classroom; groups with no files are omitted.
BiasReport bias_report(const Manifest& manifest,
                       const std::map<std::string, double>& per_file_wer,
                       GroupKey key);

}  // namespace casr

#endif  // CASR_EVAL_REPORT_HPP_
