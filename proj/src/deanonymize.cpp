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

#include "casr/deanonymize.hpp"

#include <algorithm>
#include <array>
#include <fstream>

#include "casr/util.hpp"

namespace casr {

std::string to_string(NameGender g) {
  return g == NameGender::kMale ? "male" : "female";
}

std::string to_string(NameRace r) {
  switch (r) {
    case NameRace::kWhite: return "White";
    case NameRace::kAfricanAmerican: return "African-American";
    case NameRace::kHispanic: return "Hispanic";
    case NameRace::kAsian: return "Asian";
  }
  return "White";
}

namespace {

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace

NameGender parse_name_gender(std::string_view s) {
  const std::string l = lower_ascii(trim(s));
  if (l == "male" || l == "m") return NameGender::kMale;
  if (l == "female" || l == "f") return NameGender::kFemale;
  throw Error("name table: unknown gender '" + std::string(s) + "'");
}

NameRace parse_name_race(std::string_view s) {
  const std::string l = lower_ascii(trim(s));
  if (l == "white") return NameRace::kWhite;
  if (l == "african-american" || l == "african american" || l == "afam" ||
      l == "black non hispanic" || l == "black") {
    return NameRace::kAfricanAmerican;
  }
  if (l == "hispanic") return NameRace::kHispanic;
  if (l == "asian" || l == "asian and pacific islander") return NameRace::kAsian;
  throw Error("name table: unknown race '" + std::string(s) + "'");
}

std::string to_string(Honorific h) {
  switch (h) {
    case Honorific::kNone: return "none";
    case Honorific::kMr: return "Mr";
    case Honorific::kMrs: return "Mrs";
    case Honorific::kMs: return "Ms";
    case Honorific::kDr: return "Dr";
  }
  return "none";
}

DeanonMode parse_deanon_mode(std::string_view s) {
  const std::string l = lower_ascii(trim(s));
  if (l == "race-aware") return DeanonMode::kRaceAware;
  if (l == "gender-aware") return DeanonMode::kGenderAware;
  throw Error("deanonymize: mode must be race-aware or gender-aware, got '" +
              std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// NameTable

NameTable NameTable::from_entries(std::vector<Entry> entries) {
  NameTable t;
  t.entries = std::move(entries);
  for (std::size_t i = 0; i < t.entries.size(); ++i) {
    const Entry& e = t.entries[i];
    if (e.count == 0) throw Error("name table: count must be positive for '" + e.name + "'");
    if (e.name.empty()) throw Error("name table: empty name");
    const int g = e.gender == NameGender::kMale ? 0 : 1;
    t.cells_[g][static_cast<int>(e.race)].push_back(i);
    t.pools_[g].push_back(i);
  }
  for (int g = 0; g < 2; ++g) {
    for (int r = 0; r < kNameRaceCount; ++r) {
      if (t.cells_[g][r].empty()) {
        throw Error("name table: no entry for gender " +
                    to_string(g == 0 ? NameGender::kMale : NameGender::kFemale) +
                    ", race " + to_string(static_cast<NameRace>(r)));
      }
    }
  }
  return t;
}

NameTable NameTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("name table: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("name table: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split(line, ',');
  std::map<std::string, int> col;
  for (size_t i = 0; i < header.size(); ++i) col[lower_ascii(trim(header[i]))] = static_cast<int>(i);
  for (const char* c : {"name", "gender", "race", "count"}) {
    if (!col.count(c)) throw Error("name table: " + path + " missing column '" + c + "'");
  }
  std::vector<Entry> entries;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() < 4) {
      throw Error("name table: " + path + ":" + std::to_string(lineno) +
                  ": expected 4 fields");
    }
    Entry e;
    try {
      e.name = trim(f[col.at("name")]);
      e.gender = parse_name_gender(f[col.at("gender")]);
      e.race = parse_name_race(f[col.at("race")]);
      const long long c = std::stoll(trim(f[col.at("count")]));
      if (c < 1) throw Error("count must be >= 1");
      e.count = static_cast<std::uint64_t>(c);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& ex) {
      throw Error("name table: " + path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
    entries.push_back(std::move(e));
  }
  return from_entries(std::move(entries));
}

const std::vector<std::size_t>& NameTable::cell(NameGender g, NameRace r) const {
  return cells_[g == NameGender::kMale ? 0 : 1][static_cast<int>(r)];
}

const std::vector<std::size_t>& NameTable::gender_pool(NameGender g) const {
  return pools_[g == NameGender::kMale ? 0 : 1];
}

// ---------------------------------------------------------------------------
// Mention scanning

namespace {

inline bool is_letter(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline bool is_word_char(char c) { return is_letter(c) || (c >= '0' && c <= '9'); }

struct Pattern {
  const char* prefix;  // includes the trailing space before the initial
  Honorific honorific;
};

// Longest prefixes first so "Mrs. " wins over "Mr. " at the same offset.
constexpr Pattern kPatterns[] = {
    {"Student ", Honorific::kNone},
    {"Mrs. ", Honorific::kMrs},
    {"Mr. ", Honorific::kMr},
    {"Ms. ", Honorific::kMs},
    {"Dr. ", Honorific::kDr},
};

}  // namespace

std::vector<AnonymousMention> scan_mentions(std::string_view transcript) {
  std::vector<AnonymousMention> mentions;
  size_t i = 0;
  const size_t n = transcript.size();
  while (i < n) {
    // the pattern must start on a word boundary
    if (i > 0 && is_word_char(transcript[i - 1])) {
      ++i;
      continue;
    }
    bool matched = false;
    for (const Pattern& pat : kPatterns) {
      const size_t plen = std::char_traits<char>::length(pat.prefix);
      if (transcript.compare(i, plen, pat.prefix) != 0) continue;
      const size_t xpos = i + plen;
      if (xpos >= n) continue;
      const char x = transcript[xpos];
      if (x < 'A' || x > 'Z') continue;
      // X must be a single letter, not the start of a longer word
      if (xpos + 1 < n && is_word_char(transcript[xpos + 1])) continue;
      size_t end = xpos + 1;
      // longest match: take an optional period after the initial unless it
      // is immediately followed by a word character
      if (end < n && transcript[end] == '.' &&
          !(end + 1 < n && is_word_char(transcript[end + 1]))) {
        ++end;
      }
      AnonymousMention m;
      m.initial = x;
      m.honorific = pat.honorific;
      m.offset = i;
      m.surface = std::string(transcript.substr(i, end - i));
      mentions.push_back(std::move(m));
      i = end;
      matched = true;
      break;
    }
    if (!matched) ++i;
  }
  return mentions;
}

// ---------------------------------------------------------------------------
// Deanonymization

namespace {

std::size_t sample_weighted(const NameTable& table,
                            const std::vector<std::size_t>& indices, Rng& rng) {
  std::uint64_t total = 0;
  for (std::size_t i : indices) total += table.entries[i].count;
  std::uint64_t r = rng.uniform_below(total);
  for (std::size_t i : indices) {
    const std::uint64_t c = table.entries[i].count;
    if (r < c) return i;
    r -= c;
  }
  return indices.back();  // unreachable
}

}  // namespace

DeanonResult deanonymize_transcript(std::string_view transcript,
                                    const NameTable& table, std::uint64_t seed,
                                    DeanonMode mode) {
  const std::vector<AnonymousMention> mentions = scan_mentions(transcript);

  Rng rng(seed);
  IdentityAssignment assignment;
  // identities sampled in order of first appearance
  for (const AnonymousMention& m : mentions) {
    const IdentityKey key{m.honorific, m.initial};
    if (assignment.count(key)) continue;
    IdentityChoice choice;
    switch (m.honorific) {
      case Honorific::kMrs:
      case Honorific::kMs:
        choice.gender = NameGender::kFemale;
        break;
      case Honorific::kMr:
        choice.gender = NameGender::kMale;
        break;
      case Honorific::kDr:
      case Honorific::kNone:
        choice.gender =
            rng.uniform_below(2) == 0 ? NameGender::kMale : NameGender::kFemale;
        break;
    }
    std::size_t entry_index;
    if (mode == DeanonMode::kRaceAware) {
      choice.race = static_cast<NameRace>(rng.uniform_below(kNameRaceCount));
      entry_index = sample_weighted(table, table.cell(choice.gender, choice.race), rng);
    } else {
      entry_index = sample_weighted(table, table.gender_pool(choice.gender), rng);
      choice.race = table.entries[entry_index].race;
    }
    choice.name = table.entries[entry_index].name;
    assignment.emplace(key, std::move(choice));
  }

  std::string out;
  out.reserve(transcript.size());
  size_t pos = 0;
  for (const AnonymousMention& m : mentions) {
    out.append(transcript.substr(pos, m.offset - pos));
    out.append(assignment.at(IdentityKey{m.honorific, m.initial}).name);
    pos = m.offset + m.surface.size();
  }
  out.append(transcript.substr(pos));
  return DeanonResult{std::move(out), std::move(assignment)};
}

}  // namespace casr
