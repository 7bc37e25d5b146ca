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

#include "casr/eval_report.hpp"
#include "test_support.hpp"

using namespace casr;

TEST_CASE("wer hand cases") {
  SUBCASE("identity") {
    const WERBreakdown b = compute_wer("the cat sat", "the cat sat");
    CHECK(b.substitutions == 0);
    CHECK(b.deletions == 0);
    CHECK(b.insertions == 0);
    CHECK(b.wer() == doctest::Approx(0.0));
  }
  SUBCASE("two deletions") {
    const WERBreakdown b = compute_wer("the cat sat on the mat", "the cat sat mat");
    CHECK(b.substitutions + b.deletions + b.insertions == 2);
    CHECK(b.deletions == 2);
    CHECK(b.ref_words == 6);
    CHECK(b.wer() == doctest::Approx(100.0 * 2 / 6));
  }
  SUBCASE("substitution plus insertion") {
    const WERBreakdown b = compute_wer("a b c", "a x c d");
    CHECK(b.substitutions + b.deletions + b.insertions == 2);
    CHECK(b.substitutions == 1);
    CHECK(b.insertions == 1);
    CHECK(b.wer() == doctest::Approx(100.0 * 2 / 3));
  }
  SUBCASE("empty hypothesis deletes everything") {
    const WERBreakdown b = compute_wer("a b c", "");
    CHECK(b.deletions == 3);
    CHECK(b.wer() == doctest::Approx(100.0));
  }
  SUBCASE("insertions can push wer past 100") {
    const WERBreakdown b = compute_wer("a", "x y z");
    CHECK(b.wer() > 100.0);
  }
  SUBCASE("empty reference is an error") {
    CHECK_THROWS_AS(compute_wer("", "a b"), Error);
    CHECK_THROWS_AS(compute_wer("   ", ""), Error);
  }
}

TEST_CASE("wer equals the exhaustive oracle on short pairs") {
  Rng rng(17);
  const std::vector<std::string> words = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> ref, hyp;
    const int rn = 1 + static_cast<int>(rng.uniform_below(5));
    const int hn = static_cast<int>(rng.uniform_below(6));
    for (int i = 0; i < rn; ++i) ref.push_back(words[rng.uniform_below(words.size())]);
    for (int i = 0; i < hn; ++i) hyp.push_back(words[rng.uniform_below(words.size())]);
    const WERBreakdown b = compute_wer(join(ref, " "), join(hyp, " "));
    const std::uint64_t expected = test::exhaustive_min_edit(ref, hyp);
    CHECK(b.substitutions + b.deletions + b.insertions == expected);
    // substitution-only alignment upper-bounds the minimal distance
    std::uint64_t subs_only = std::max(ref.size(), hyp.size());
    CHECK(expected <= subs_only);
  }
}

TEST_CASE("fold aggregation reproduces published arithmetic") {
  SUBCASE("six cross-validation folds") {
    const FoldReport r = aggregate_folds({{"144", 15.20},
                                          {"622", 18.77},
                                          {"2619", 27.15},
                                          {"2709", 13.12},
                                          {"2944", 17.61},
                                          {"4724", 14.43}});
    CHECK(std::abs(r.mean - 17.71) <= 0.01);
    REQUIRE(r.stddev.has_value());
    CHECK(std::abs(*r.stddev - 5.06) <= 0.01);  // sample (n-1) convention
    CHECK(r.formatted() == "17.71(5.07)");       // the exact value is 5.0670
  }
  SUBCASE("sample convention is confirmed by an exactly-consistent column") {
    const FoldReport r = aggregate_folds({{"OH-1", 19.76},
                                          {"OH-2", 16.42},
                                          {"DC-1", 28.79},
                                          {"DC-2", 26.42},
                                          {"CA-1", 55.77},
                                          {"CA-2", 24.04}});
    CHECK(r.formatted() == "28.53(14.07)");
  }
  SUBCASE("another exactly-consistent column") {
    const FoldReport r = aggregate_folds({{"144", 27.85},
                                          {"622", 30.55},
                                          {"2619", 42.86},
                                          {"2709", 22.84},
                                          {"2944", 26.64},
                                          {"4724", 30.74}});
    CHECK(r.formatted() == "30.25(6.83)");
  }
  SUBCASE("population std would disagree") {
    const FoldReport r = aggregate_folds({{"144", 15.20},
                                          {"622", 18.77},
                                          {"2619", 27.15},
                                          {"2709", 13.12},
                                          {"2944", 17.61},
                                          {"4724", 14.43}});
    double pop = 0;
    for (const auto& [id, w] : r.per_file) pop += (w - r.mean) * (w - r.mean);
    pop = std::sqrt(pop / r.per_file.size());
    CHECK(std::abs(pop - 4.63) <= 0.01);
    CHECK(*r.stddev > pop);
  }
  SUBCASE("single file has no std") {
    const FoldReport r = aggregate_folds({{"x", 20.0}});
    CHECK(r.mean == doctest::Approx(20.0));
    CHECK_FALSE(r.stddev.has_value());
    CHECK(r.formatted() == "20.00");
  }
  SUBCASE("empty map is an error") {
    CHECK_THROWS_AS(aggregate_folds({}), Error);
  }
}

TEST_CASE("bias report reproduces the held-out test groupings") {
  Manifest manifest;
  manifest.classrooms = parse_classroom_csv(test::fixture_path("ncte.classrooms.csv"));
  const std::map<std::string, double> test_wers = {
      {"13", 25.07}, {"4106", 25.79}, {"4352", 22.30}, {"4651", 29.47}};

  SUBCASE("teacher race") {
    const BiasReport r = bias_report(manifest, test_wers, GroupKey::kTeacherRace);
    REQUIRE(r.group_mean.size() == 3);
    CHECK(r.group_mean.at("White") == doctest::Approx(22.30).epsilon(1e-9));
    CHECK(r.group_mean.at("Asian") == doctest::Approx(25.07).epsilon(1e-9));
    CHECK(std::abs(r.group_mean.at("African-American") - 27.63) <= 0.01);
    CHECK(std::abs(r.max_gap - 5.33) <= 0.01);
  }
  SUBCASE("average of the four held-out files") {
    const FoldReport avg = aggregate_folds(test_wers);
    CHECK(std::abs(avg.mean - 25.66) <= 0.01);
  }
  SUBCASE("teacher gender") {
    const BiasReport r = bias_report(manifest, test_wers, GroupKey::kTeacherGender);
    REQUIRE(r.group_mean.size() == 2);
    CHECK(r.group_mean.at("male") ==
          doctest::Approx((25.07 + 22.30) / 2).epsilon(1e-9));
    CHECK(r.group_mean.at("female") ==
          doctest::Approx((25.79 + 29.47) / 2).epsilon(1e-9));
  }
  SUBCASE("microphone grouping on the cross-validation classes") {
    const std::map<std::string, double> cv_wers = {
        {"144", 15.20}, {"622", 18.77}, {"2619", 27.15},
        {"2709", 13.12}, {"2944", 17.61}, {"4724", 14.43}};
    const BiasReport r = bias_report(manifest, cv_wers, GroupKey::kMicrophone);
    REQUIRE(r.group_mean.size() == 2);
    CHECK(r.group_size.at("FF") == 1);  // exactly class 2619
    CHECK(r.group_mean.at("FF") == doctest::Approx(27.15).epsilon(1e-9));
    CHECK(r.group_size.at("NF") == 5);
  }
  SUBCASE("single group has zero gap") {
    const BiasReport r = bias_report(
        manifest, {{"144", 15.20}, {"2619", 27.15}}, GroupKey::kTeacherGender);
    REQUIRE(r.group_mean.size() == 1);
    CHECK(r.max_gap == doctest::Approx(0.0));
  }
  SUBCASE("unresolvable file is an error") {
    CHECK_THROWS_AS(bias_report(manifest, {{"999", 10.0}}, GroupKey::kMicrophone),
                    Error);
  }
}
