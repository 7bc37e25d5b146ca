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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "casr/deanonymize.hpp"
#include "test_support.hpp"

using namespace casr;

namespace {

NameTable fixture_table() { return NameTable::load(test::fixture_path("names.csv")); }

// quick mention builder for readable expectations
struct M {
  Honorific h;
  char x;
  std::string surface;
};

std::vector<M> scan(const std::string& text) {
  std::vector<M> out;
  for (const auto& m : scan_mentions(text)) out.push_back({m.honorific, m.initial, m.surface});
  return out;
}

}  // namespace

TEST_CASE("mention scanning") {
  SUBCASE("paper-style examples") {
    const auto ms = scan("Student K asked Mrs. D");
    REQUIRE(ms.size() == 2);
    CHECK(ms[0].h == Honorific::kNone);
    CHECK(ms[0].x == 'K');
    CHECK(ms[0].surface == "Student K");
    CHECK(ms[1].h == Honorific::kMrs);
    CHECK(ms[1].x == 'D');
    CHECK(ms[1].surface == "Mrs. D");
  }
  SUBCASE("no single-letter placeholder") {
    CHECK(scan("The students were loud").empty());
    CHECK(scan("Student Kevin answered").empty());
    CHECK(scan("Mr. Smith waved").empty());
    CHECK(scan("students and teachers").empty());
  }
  SUBCASE("optional period is part of the surface") {
    const auto ms = scan("Student K. and Student K spoke");
    REQUIRE(ms.size() == 2);
    CHECK(ms[0].surface == "Student K.");
    CHECK(ms[1].surface == "Student K");
    CHECK(ms[0].h == ms[1].h);
    CHECK(ms[0].x == ms[1].x);
  }
  SUBCASE("word boundaries are respected") {
    CHECK(scan("XStudent K").empty());
    const auto ms = scan("Student K's notebook");
    REQUIRE(ms.size() == 1);
    CHECK(ms[0].surface == "Student K");  // apostrophe is not consumed
  }
  SUBCASE("all honorifics") {
    const auto ms = scan("Mr. A, Mrs. B, Ms. C and Dr. D");
    REQUIRE(ms.size() == 4);
    CHECK(ms[0].h == Honorific::kMr);
    CHECK(ms[1].h == Honorific::kMrs);
    CHECK(ms[2].h == Honorific::kMs);
    CHECK(ms[3].h == Honorific::kDr);
  }
  SUBCASE("sentence-final period is consumed by longest match") {
    const auto ms = scan("He asked Student K.");
    REQUIRE(ms.size() == 1);
    CHECK(ms[0].surface == "Student K.");
  }
}

TEST_CASE("name table validation") {
  CHECK_THROWS_AS(NameTable::from_entries({}), Error);
  CHECK_THROWS_AS(NameTable::from_entries({{"Ann", NameGender::kFemale,
                                            NameRace::kWhite, 0}}),
                  Error);
  // one cell missing
  std::vector<NameTable::Entry> entries;
  for (int g = 0; g < 2; ++g) {
    for (int r = 0; r < kNameRaceCount - 1; ++r) {
      entries.push_back({"N" + std::to_string(g * 4 + r),
                         g == 0 ? NameGender::kMale : NameGender::kFemale,
                         static_cast<NameRace>(r), 10});
    }
  }
  CHECK_THROWS_AS(NameTable::from_entries(entries), Error);

  const NameTable table = fixture_table();
  CHECK(table.entries.size() == 40);
  for (int g = 0; g < 2; ++g) {
    for (int r = 0; r < kNameRaceCount; ++r) {
      CHECK(table
                .cell(g == 0 ? NameGender::kMale : NameGender::kFemale,
                      static_cast<NameRace>(r))
                .size() == 5);
    }
  }
}

TEST_CASE("transcripts without mentions pass through") {
  const NameTable table = fixture_table();
  const std::string text = "The class worked quietly on fractions.";
  const DeanonResult r = deanonymize_transcript(text, table, 42, DeanonMode::kRaceAware);
  CHECK(r.text == text);
  CHECK(r.assignment.empty());
}

TEST_CASE("identity consistency and determinism") {
  const NameTable table = fixture_table();
  SUBCASE("repeated mentions share one name") {
    const DeanonResult r = deanonymize_transcript(
        "Student K said hi. Student K left.", table, 7, DeanonMode::kRaceAware);
    REQUIRE(r.assignment.size() == 1);
    const std::string& name = r.assignment.begin()->second.name;
    CHECK(r.text == name + " said hi. " + name + " left.");
  }
  SUBCASE("same inputs give identical outputs") {
    const std::string text = "Mrs. D helped Student K and Dr. P today.";
    const DeanonResult a = deanonymize_transcript(text, table, 99, DeanonMode::kRaceAware);
    const DeanonResult b = deanonymize_transcript(text, table, 99, DeanonMode::kRaceAware);
    CHECK(a.text == b.text);
    // a different seed eventually differs
    bool differs = false;
    for (std::uint64_t s = 0; s < 20 && !differs; ++s) {
      differs = deanonymize_transcript(text, table, s, DeanonMode::kRaceAware).text != a.text;
    }
    CHECK(differs);
  }
  SUBCASE("student and honorific identities with the same letter are distinct") {
    casr::Rng rng(5);
    bool saw_different_names = false;
    for (int s = 0; s < 30; ++s) {
      const DeanonResult r = deanonymize_transcript(
          "Student D met Mrs. D", table, s, DeanonMode::kRaceAware);
      REQUIRE(r.assignment.size() == 2);
      const auto student = r.assignment.at({Honorific::kNone, 'D'});
      const auto teacher = r.assignment.at({Honorific::kMrs, 'D'});
      CHECK(teacher.gender == NameGender::kFemale);
      if (student.name != teacher.name) saw_different_names = true;
    }
    CHECK(saw_different_names);
  }
  SUBCASE("consistency on randomized transcripts") {
    casr::Rng rng(123);
    const char* honorifics[] = {"Student ", "Mr. ", "Mrs. ", "Ms. ", "Dr. "};
    for (int trial = 0; trial < 1000; ++trial) {
      std::string text;
      std::vector<std::pair<std::string, char>> used;
      const int n = 2 + static_cast<int>(rng.uniform_below(6));
      for (int i = 0; i < n; ++i) {
        const char* h = honorifics[rng.uniform_below(5)];
        const char x = static_cast<char>('A' + rng.uniform_below(6));
        text += std::string(h) + x + " spoke. ";
        used.emplace_back(h, x);
      }
      const DeanonResult r =
          deanonymize_transcript(text, table, trial, DeanonMode::kRaceAware);
      // rebuild expected text from the assignment; equal identities must
      // have received equal names
      std::string expected;
      for (const auto& [h, x] : used) {
        Honorific hon = Honorific::kNone;
        if (std::string(h) == "Mr. ") hon = Honorific::kMr;
        else if (std::string(h) == "Mrs. ") hon = Honorific::kMrs;
        else if (std::string(h) == "Ms. ") hon = Honorific::kMs;
        else if (std::string(h) == "Dr. ") hon = Honorific::kDr;
        expected += r.assignment.at({hon, x}).name + " spoke. ";
      }
      CHECK(r.text == expected);
    }
  }
}

TEST_CASE("non-mention text is conserved byte for byte") {
  const NameTable table = fixture_table();
  casr::Rng rng(321);
  const std::string fillers[] = {"the class read ", "fractions, right? ", "ok -- ",
                                 "\"quote\" ", "page 12 ", "\xc3\xa9migr\xc3\xa9 "};
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const int n = 1 + static_cast<int>(rng.uniform_below(5));
    for (int i = 0; i < n; ++i) {
      text += fillers[rng.uniform_below(6)];
      if (rng.uniform_below(2) == 0) text += "Student " + std::string(1, 'A' + static_cast<char>(rng.uniform_below(4))) + " ";
      if (rng.uniform_below(3) == 0) text += "Mrs. " + std::string(1, 'A' + static_cast<char>(rng.uniform_below(4))) + ". ";
    }
    const auto mentions = scan_mentions(text);
    const DeanonResult r = deanonymize_transcript(text, table, trial, DeanonMode::kRaceAware);

    // walk both strings, skipping the mention span in the input and the
    // replacement name in the output; interstitial bytes must be identical
    size_t pi = 0, po = 0;
    for (const auto& m : mentions) {
      const size_t gap = m.offset - pi;
      CHECK(text.substr(pi, gap) == r.text.substr(po, gap));
      const std::string& name = r.assignment.at({m.honorific, m.initial}).name;
      CHECK(r.text.substr(po + gap, name.size()) == name);
      pi = m.offset + m.surface.size();
      po += gap + name.size();
    }
    CHECK(text.substr(pi) == r.text.substr(po));
  }
}

TEST_CASE("honorifics constrain gender") {
  const NameTable table = fixture_table();
  for (int s = 0; s < 50; ++s) {
    const DeanonResult r = deanonymize_transcript("Mrs. A and Ms. B and Mr. C", table,
                                                  s, DeanonMode::kRaceAware);
    CHECK(r.assignment.at({Honorific::kMrs, 'A'}).gender == NameGender::kFemale);
    CHECK(r.assignment.at({Honorific::kMs, 'B'}).gender == NameGender::kFemale);
    CHECK(r.assignment.at({Honorific::kMr, 'C'}).gender == NameGender::kMale);
  }
}

TEST_CASE("race-aware sampling is uniform over gender and race cells") {
  const NameTable table = fixture_table();
  const int n = 10000;
  std::map<std::pair<int, int>, int> cells;
  int males = 0;
  std::map<int, int> races;
  for (int i = 0; i < n; ++i) {
    // "Student X" mentions sample gender uniformly
    const DeanonResult r =
        deanonymize_transcript("Student Q said hi", table, i, DeanonMode::kRaceAware);
    const IdentityChoice& c = r.assignment.at({Honorific::kNone, 'Q'});
    const int g = c.gender == NameGender::kMale ? 0 : 1;
    males += g == 0 ? 1 : 0;
    ++races[static_cast<int>(c.race)];
    ++cells[{g, static_cast<int>(c.race)}];
  }
  // each (gender, race) cell within 3 standard deviations of n/8
  const double expect = n / 8.0;
  const double sigma = std::sqrt(n * (1.0 / 8) * (7.0 / 8));
  for (int g = 0; g < 2; ++g) {
    for (int r = 0; r < kNameRaceCount; ++r) {
      CHECK(std::abs(cells[{g, r}] - expect) <= 3 * sigma);
    }
  }
  CHECK(std::abs(males - n / 2.0) <= 3 * std::sqrt(n * 0.25));
  for (int r = 0; r < kNameRaceCount; ++r) {
    CHECK(std::abs(races[r] - n / 4.0) <= 3 * std::sqrt(n * (1.0 / 4) * (3.0 / 4)));
  }
}

TEST_CASE("name frequencies converge to popularity weights") {
  const NameTable table = fixture_table();
  const int n = 50000;
  // fix gender=female via Mrs., count name draws per race cell
  std::map<std::string, int> counts;
  std::map<int, int> race_totals;
  for (int i = 0; i < n; ++i) {
    const DeanonResult r =
        deanonymize_transcript("Mrs. Z", table, 1000000 + i, DeanonMode::kRaceAware);
    const IdentityChoice& c = r.assignment.at({Honorific::kMrs, 'Z'});
    ++counts[c.name];
    ++race_totals[static_cast<int>(c.race)];
  }
  for (int r = 0; r < kNameRaceCount; ++r) {
    const auto& cell = table.cell(NameGender::kFemale, static_cast<NameRace>(r));
    double cell_count = 0;
    for (size_t idx : cell) cell_count += static_cast<double>(table.entries[idx].count);
    double tv = 0;
    for (size_t idx : cell) {
      const auto& e = table.entries[idx];
      const double expected = e.count / cell_count;
      const double observed =
          race_totals[r] > 0 ? static_cast<double>(counts[e.name]) / race_totals[r] : 0;
      tv += std::abs(expected - observed);
    }
    CHECK(tv / 2 < 0.05);
  }
}

TEST_CASE("gender-aware mode follows pooled popularity, not uniform race") {
  // skewed table: for females, White names carry 70% of the count mass
  std::vector<NameTable::Entry> entries;
  const std::uint64_t big = 700, small = 100;
  entries.push_back({"Whitef", NameGender::kFemale, NameRace::kWhite, big});
  entries.push_back({"Afamf", NameGender::kFemale, NameRace::kAfricanAmerican, small});
  entries.push_back({"Hispf", NameGender::kFemale, NameRace::kHispanic, small});
  entries.push_back({"Asianf", NameGender::kFemale, NameRace::kAsian, small});
  entries.push_back({"Whitem", NameGender::kMale, NameRace::kWhite, big});
  entries.push_back({"Afamm", NameGender::kMale, NameRace::kAfricanAmerican, small});
  entries.push_back({"Hispm", NameGender::kMale, NameRace::kHispanic, small});
  entries.push_back({"Asianm", NameGender::kMale, NameRace::kAsian, small});
  const NameTable table = NameTable::from_entries(entries);

  const int n = 20000;
  int white_pooled = 0, white_uniformr = 0;
  for (int i = 0; i < n; ++i) {
    const auto pooled =
        deanonymize_transcript("Mrs. Q", table, i, DeanonMode::kGenderAware);
    if (pooled.assignment.at({Honorific::kMrs, 'Q'}).race == NameRace::kWhite) {
      ++white_pooled;
    }
    const auto aware =
        deanonymize_transcript("Mrs. Q", table, i, DeanonMode::kRaceAware);
    if (aware.assignment.at({Honorific::kMrs, 'Q'}).race == NameRace::kWhite) {
      ++white_uniformr;
    }
  }
  // pooled sampling follows the 70% mass; race-aware stays at 25%
  CHECK(std::abs(white_pooled / double(n) - 0.7) < 0.02);
  CHECK(std::abs(white_uniformr / double(n) - 0.25) < 0.02);
}

TEST_CASE("fixed-seed golden output") {
  const NameTable table = fixture_table();
  const auto input = read_lines(test::fixture_path("deanon_golden_input.txt"));
  std::vector<std::string> output;
  for (size_t i = 0; i < input.size(); ++i) {
    output.push_back(
        deanonymize_transcript(input[i], table, derive_seed(7, i), DeanonMode::kRaceAware)
            .text);
  }
  const auto golden = read_lines(test::fixture_path("deanon_golden_seed7.txt"));
  REQUIRE(golden.size() == output.size());
  for (size_t i = 0; i < output.size(); ++i) {
    CHECK_MESSAGE(output[i] == golden[i], "line " << i);
  }
}
