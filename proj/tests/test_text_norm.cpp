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

#include "casr/text_norm.hpp"
#include "casr/util.hpp"

using casr::normalize;

TEST_CASE("basic punctuation and case") {
  CHECK(normalize("Hello,   World!") == "hello world");
  CHECK(normalize("don't STOP") == "don't stop");
  CHECK(normalize("") == "");
  CHECK(normalize("   ") == "");
  CHECK(normalize("The CAT.") == "the cat");
}

TEST_CASE("apostrophes are kept only between letters") {
  // the em-dash is U+2014
  CHECK(normalize("it's the students' turn \xe2\x80\x94 okay?") ==
        "it's the students turn okay");
  CHECK(normalize("students' turn") == "students turn");
  CHECK(normalize("don''t") == "don t");
  CHECK(normalize("'hello'") == "hello");
  CHECK(normalize("3'4") == "3 4");
  CHECK(normalize("rock 'n' roll") == "rock n roll");
}

TEST_CASE("unicode folding") {
  CHECK(normalize("caf\xc3\xa9") == "cafe");          // e-acute
  CHECK(normalize("don\xe2\x80\x99t") == "don't");    // curly apostrophe
  CHECK(normalize("na\xc3\xafve pi\xc3\xb1ata") == "naive pinata");
  CHECK(normalize("A\xc2\xa0ic B") == "a ic b");       // non-breaking space
  CHECK(normalize("\xe4\xb8\xad\xe6\x96\x87 ok") == "ok");  // unmapped CJK
}

TEST_CASE("digits pass through") {
  CHECK(normalize("Page 42!") == "page 42");
  CHECK(normalize("3.14") == "3 14");
}

TEST_CASE("total on invalid utf-8") {
  CHECK(normalize("ab\xffzz") == "ab zz");
  CHECK(normalize("\xc3") == "");  // truncated sequence
}

TEST_CASE("idempotence and closure on randomized inputs") {
  casr::Rng rng(123);
  const std::vector<std::string> pool = {
      "a", "B",  "z",  "9",    "'",  " ",   ",",  "!",  "-", "_",
      "(", "\t", "\n", "\xc3\xa9", "\xe2\x80\x99", "\xe2\x80\x94", "\xc2\xa0",
      "\xe4\xb8\xad", "don't", "Mrs.", "\xff"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string input;
    const int len = static_cast<int>(rng.uniform_below(30));
    for (int i = 0; i < len; ++i) {
      input += pool[rng.uniform_below(pool.size())];
    }
    const std::string once = normalize(input);
    CHECK(normalize(once) == once);
    for (char c : once) {
      const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                      c == '\'' || c == ' ';
      CHECK(ok);
    }
    if (!once.empty()) {
      CHECK(once.front() != ' ');
      CHECK(once.back() != ' ');
      CHECK(once.find("  ") == std::string::npos);
    }
  }
}
