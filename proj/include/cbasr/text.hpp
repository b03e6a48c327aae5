// Copyright (c) 2026 cbasr authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CBASR_TEXT_HPP_
#define CBASR_TEXT_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace cbasr {

// UTF-8 helpers shared by entity normalization, tokenization and the
// deterministic mock stack. Invalid byte sequences decode to U+FFFD and
// never throw; scoring must survive arbitrary model output.

std::vector<char32_t> utf8_decode(const std::string& text);
std::string utf8_encode(const std::vector<char32_t>& codepoints);
std::string utf8_encode_one(char32_t cp);

// Character classes used by the mixed tokenizer.
bool is_han(char32_t cp);
bool is_latin_letter(char32_t cp);
bool is_ascii_digit(char32_t cp);

// Full-width ASCII block (U+FF01..U+FF5E) and ideographic space folded to
// their half-width counterparts; everything else passes through.
char32_t fold_width(char32_t cp);

// Lowercases ASCII only; non-Latin scripts are untouched.
char32_t to_lower_latin(char32_t cp);

// Matching text for an entity word: width-folded, Latin lowercased,
// whitespace collapsed to single spaces and trimmed.
std::string normalize_entity(const std::string& surface);

// Reverses codepoint order ("abc" -> "cba"); used for suffix-neighbor
// lookups over a vocabulary.
std::string reverse_codepoints(const std::string& word);

}  // namespace cbasr

#endif  // CBASR_TEXT_HPP_
