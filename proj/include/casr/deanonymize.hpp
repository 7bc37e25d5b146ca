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

#ifndef CASR_DEANONYMIZE_HPP_
#define CASR_DEANONYMIZE_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace casr {

enum class NameGender { kMale, kFemale };
enum class NameRace { kWhite, kAfricanAmerican, kHispanic, kAsian };

inline constexpr int kNameRaceCount = 4;

std::string to_string(NameGender g);
std::string to_string(NameRace r);
NameGender parse_name_gender(std::string_view s);
NameRace parse_name_race(std::string_view s);

/// Popularity-weighted name list. Every (gender, race) pair must have at
/// least one entry; counts are positive.
struct NameTable {
  struct Entry {
    std::string name;
    NameGender gender = NameGender::kFemale;
    NameRace race = NameRace::kWhite;
    std::uint64_t count = 0;
  };
  std::vector<Entry> entries;

  /// CSV with header columns name,gender,race,count.
  static NameTable load(const std::string& path);
  static NameTable from_entries(std::vector<Entry> entries);

  /// Entry indices per (gender, race) cell, in table order.
  const std::vector<std::size_t>& cell(NameGender g, NameRace r) const;
  /// Entry indices per gender pooled across races, in table order.
  const std::vector<std::size_t>& gender_pool(NameGender g) const;

 private:
  std::vector<std::size_t> cells_[2][kNameRaceCount];
  std::vector<std::size_t> pools_[2];
};

/// Honorific class of an anonymized mention. "Student X" carries no
/// honorific; it is a distinct identity class from any honorific with the
/// same initial.
enum class Honorific { kNone, kMr, kMrs, kMs, kDr };

std::string to_string(Honorific h);

struct AnonymousMention {
  char initial = 'A';            // single uppercase letter
  Honorific honorific = Honorific::kNone;
  std::string surface;           // exact matched span
  std::size_t offset = 0;        // byte offset of the span
};

/// Finds every non-overlapping "Student X" / "Mr. X" / "Mrs. X" / "Ms. X" /
/// "Dr. X" mention, where X is one uppercase letter optionally followed by
/// a period. Scans left to right, longest match first.
std::vector<AnonymousMention> scan_mentions(std::string_view transcript);

enum class DeanonMode { kRaceAware, kGenderAware };

DeanonMode parse_deanon_mode(std::string_view s);

struct IdentityKey {
  Honorific honorific = Honorific::kNone;
  char initial = 'A';
  bool operator<(const IdentityKey& o) const {
    return honorific != o.honorific ? honorific < o.honorific : initial < o.initial;
  }
};

struct IdentityChoice {
  std::string name;
  NameGender gender = NameGender::kFemale;
  NameRace race = NameRace::kWhite;
};

/// Per-transcript identity map, deterministic under a fixed seed.
using IdentityAssignment = std::map<IdentityKey, IdentityChoice>;

struct DeanonResult {
  std::string text;
  IdentityAssignment assignment;
};

/// Replaces every anonymized mention with a sampled name, consistently per
/// (honorific, initial) identity within the transcript.
///
/// Gender is forced by the honorific where it is informative (Mrs./Ms. ->
/// female, Mr. -> male) and sampled uniformly otherwise. In race-aware mode
/// a race is sampled uniformly over the four categories and the name is
/// drawn from the (gender, race) cell with probability proportional to its
/// count; in gender-aware mode race is ignored and the name is drawn
/// count-proportionally from the whole gender pool. Text outside mention
/// spans is preserved byte for byte.
DeanonResult deanonymize_transcript(std::string_view transcript,
                                    const NameTable& table, std::uint64_t seed,
                                    DeanonMode mode);

}  // namespace casr

#endif  // CASR_DEANONYMIZE_HPP_
