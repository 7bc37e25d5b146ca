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

#include "casr/text_norm.hpp"

#include <cstdint>

namespace casr {

namespace {

// Decodes one UTF-8 code point starting at s[i]. Advances i past the
// sequence. Returns 0xFFFD for malformed sequences (advancing one byte).
std::uint32_t decode_utf8(std::string_view s, size_t& i) {
  const unsigned char b0 = s[i];
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  std::uint32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + len > s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const unsigned char b = s[i + k];
    if ((b & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += len;
  return cp;
}

// Compatibility fold for code points that carry over into the normalized
// alphabet. Returns nullptr when the code point has no ascii equivalent
// (it is then handled as punctuation by the next stage).
const char* fold_codepoint(std::uint32_t cp) {
  switch (cp) {
    // typographic apostrophes and primes
    case 0x2018: case 0x2019: case 0x02BC: case 0x00B4: case 0x2032:
      return "'";
    // dashes fold to a plain hyphen (stripped as punctuation later)
    case 0x2010: case 0x2011: case 0x2012: case 0x2013: case 0x2014:
    case 0x2015: case 0x2212:
      return "-";
    // spaces
    case 0x00A0: case 0x2007: case 0x202F: case 0x2009: case 0x200A:
    case 0x2002: case 0x2003:
      return " ";
    // ligatures
    case 0xFB01: return "fi";
    case 0xFB02: return "fl";
    case 0x00C6: return "AE";
    case 0x00E6: return "ae";
    case 0x0152: return "OE";
    case 0x0153: return "oe";
    case 0x00DF: return "ss";
    default: break;
  }
  return nullptr;
}

// Latin letters with diacritics fold to their base letter; 0 when the code
// point is not such a letter.
char fold_accented_letter(std::uint32_t cp) {
  static const struct { std::uint32_t lo, hi; char base; } kRanges[] = {
      {0x00C0, 0x00C5, 'A'}, {0x00C8, 0x00CB, 'E'}, {0x00CC, 0x00CF, 'I'},
      {0x00D2, 0x00D6, 'O'}, {0x00D9, 0x00DC, 'U'}, {0x00E0, 0x00E5, 'a'},
      {0x00E8, 0x00EB, 'e'}, {0x00EC, 0x00EF, 'i'}, {0x00F2, 0x00F6, 'o'},
      {0x00F9, 0x00FC, 'u'},
  };
  for (const auto& r : kRanges) {
    if (cp >= r.lo && cp <= r.hi) return r.base;
  }
  switch (cp) {
    case 0x00C7: return 'C';
    case 0x00E7: return 'c';
    case 0x00D1: return 'N';
    case 0x00F1: return 'n';
    case 0x00D8: return 'O';
    case 0x00F8: return 'o';
    case 0x00DD: return 'Y';
    case 0x00FD: case 0x00FF: return 'y';
    case 0x0160: return 'S';
    case 0x0161: return 's';
    case 0x017D: return 'Z';
    case 0x017E: return 'z';
    case 0x0178: return 'Y';
    default: return 0;
  }
}

inline bool is_ascii_letter(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

std::string normalize(std::string_view text) {
  // Stage 1+2: fold to ascii and lowercase. Unknown non-ascii becomes a
  // space so stage 3 treats it as punctuation.
  std::string folded;
  folded.reserve(text.size());
  size_t i = 0;
  while (i < text.size()) {
    const std::uint32_t cp = decode_utf8(text, i);
    if (cp < 0x80) {
      char c = static_cast<char>(cp);
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      folded.push_back(c);
    } else if (const char* rep = fold_codepoint(cp)) {
      for (const char* p = rep; *p; ++p) {
        char c = *p;
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        folded.push_back(c);
      }
    } else if (char base = fold_accented_letter(cp)) {
      if (base >= 'A' && base <= 'Z') base = static_cast<char>(base - 'A' + 'a');
      folded.push_back(base);
    } else {
      folded.push_back(' ');
    }
  }

  // Stage 3: keep [a-z0-9]; keep apostrophes flanked by letters on both
  // sides; everything else becomes a space.
  std::string stripped;
  stripped.reserve(folded.size());
  for (size_t k = 0; k < folded.size(); ++k) {
    const char c = folded[k];
    if ((c >= 'a' && c <= 'z') || is_ascii_digit(c)) {
      stripped.push_back(c);
    } else if (c == '\'' && k > 0 && k + 1 < folded.size() &&
               is_ascii_letter(folded[k - 1]) && is_ascii_letter(folded[k + 1])) {
      stripped.push_back('\'');
    } else {
      stripped.push_back(' ');
    }
  }

  // Stage 4: collapse whitespace runs to single spaces, trim ends.
  std::string out;
  out.reserve(stripped.size());
  bool pending_space = false;
  for (char c : stripped) {
    if (c == ' ') {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace casr
