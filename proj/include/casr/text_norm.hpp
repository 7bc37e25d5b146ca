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

#ifndef CASR_TEXT_NORM_HPP_
#define CASR_TEXT_NORM_HPP_

#include <string>
#include <string_view>

namespace casr {

// Deterministic text normalization applied identically to LM training text,
// reference transcripts and decoder output. Rules run in a fixed order:
//
//   1. unicode compatibility fold (accented latin -> ascii base letters,
//      typographic quotes/dashes -> ascii equivalents)
//   2. lowercase
//   3. punctuation -> space, keeping apostrophes flanked by letters on
//      both sides
//   4. whitespace collapse and trim
//
// The output alphabet is {a-z, 0-9, apostrophe, space} and the function is
// idempotent and total (invalid UTF-8 bytes are treated as punctuation).
std::string normalize(std::string_view text);

}  // namespace casr

#endif  // CASR_TEXT_NORM_HPP_
