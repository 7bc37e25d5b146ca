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

#include "casr/eval_report.hpp"

#include <algorithm>
#include <cmath>

#include "casr/util.hpp"

namespace casr {

WERBreakdown compute_wer(const std::string& reference, const std::string& hypothesis) {
  const std::vector<std::string> ref = split_ws(reference);
  const std::vector<std::string> hyp = split_ws(hypothesis);
  if (ref.empty()) throw Error("compute_wer: empty reference");

  const size_t m = ref.size(), n = hyp.size();
  // cost[i][j]: minimal edits aligning ref[0..i) with hyp[0..j)
  std::vector<std::uint64_t> cost((m + 1) * (n + 1));
  auto at = [&](size_t i, size_t j) -> std::uint64_t& { return cost[i * (n + 1) + j]; };
  for (size_t i = 0; i <= m; ++i) at(i, 0) = i;
  for (size_t j = 0; j <= n; ++j) at(0, j) = j;
  for (size_t i = 1; i <= m; ++i) {
    for (size_t j = 1; j <= n; ++j) {
      const std::uint64_t sub = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const std::uint64_t del = at(i - 1, j) + 1;
      const std::uint64_t ins = at(i, j - 1) + 1;
      at(i, j) = std::min({sub, del, ins});
    }
  }

  // backtrace; prefer diagonal, then deletion, then insertion
  WERBreakdown b;
  b.ref_words = m;
  size_t i = m, j = n;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const std::uint64_t step = (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      if (at(i, j) == at(i - 1, j - 1) + step) {
        b.substitutions += step;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++b.deletions;
      --i;
      continue;
    }
    ++b.insertions;
    --j;
  }
  return b;
}

std::string FoldReport::formatted() const {
  std::string out = format_fixed(mean, 2);
  if (stddev) out += "(" + format_fixed(*stddev, 2) + ")";
  return out;
}

FoldReport aggregate_folds(const std::map<std::string, double>& per_file) {
  if (per_file.empty()) throw Error("aggregate_folds: empty per-file map");
  FoldReport r;
  r.per_file = per_file;
  double sum = 0.0;
  for (const auto& [id, wer] : per_file) sum += wer;
  const double n = static_cast<double>(per_file.size());
  r.mean = sum / n;
  if (per_file.size() >= 2) {
    double ss = 0.0;
    for (const auto& [id, wer] : per_file) {
      const double d = wer - r.mean;
      ss += d * d;
    }
    r.stddev = std::sqrt(ss / (n - 1.0));
  }
  return r;
}

GroupKey parse_group_key(std::string_view s) {
  const std::string t = trim(s);
  if (t == "teacher_race") return GroupKey::kTeacherRace;
  if (t == "teacher_gender") return GroupKey::kTeacherGender;
  if (t == "microphone") return GroupKey::kMicrophone;
  throw Error("report: group key must be teacher_race, teacher_gender or microphone, got '" +
              t + "'");
}

std::string to_string(GroupKey k) {
  switch (k) {
    case GroupKey::kTeacherRace: return "teacher_race";
    case GroupKey::kTeacherGender: return "teacher_gender";
    case GroupKey::kMicrophone: return "microphone";
  }
  return "teacher_race";
}

BiasReport bias_report(const Manifest& manifest,
                       const std::map<std::string, double>& per_file_wer,
                       GroupKey key) {
  BiasReport report;
  report.key = key;
  std::map<std::string, std::pair<double, int>> acc;  // group -> (sum, count)
  for (const auto& [file_id, wer] : per_file_wer) {
    auto it = manifest.classrooms.find(file_id);
    if (it == manifest.classrooms.end()) {
      throw Error("report: file '" + file_id + "' has no classroom metadata");
    }
    const ClassroomMetadata& md = it->second;
    std::string group;
    switch (key) {
      case GroupKey::kTeacherRace: group = to_string(md.teacher_race); break;
      case GroupKey::kTeacherGender: group = to_string(md.teacher_gender); break;
      case GroupKey::kMicrophone: group = to_string(md.microphone); break;
    }
    auto& [sum, count] = acc[group];
    sum += wer;
    ++count;
  }
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& [group, sc] : acc) {
    const double mean = sc.first / sc.second;
    report.group_mean[group] = mean;
    report.group_size[group] = sc.second;
    if (first) {
      lo = hi = mean;
      first = false;
    } else {
      lo = std::min(lo, mean);
      hi = std::max(hi, mean);
    }
  }
  report.max_gap = acc.empty() ? 0.0 : hi - lo;
  return report;
}

}  // namespace casr
