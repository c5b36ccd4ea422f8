#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace forge {

using Tokens = std::vector<std::string>;

// Lowercased maximal runs of ASCII letters/digits. Bytes >= 0x80 are kept
// inside tokens so UTF-8 words are not shredded. No stemming.
Tokens tokenize(std::string_view text);

// Whitespace-delimited word count (plain prose length).
std::size_t count_words(std::string_view text);

// Splits prose on '.', '!' or '?' followed by whitespace (or end of text).
// Pieces are trimmed; empty pieces are dropped.
std::vector<std::string> split_sentences(std::string_view text);

std::string trim(std::string_view text);
std::string to_lower(std::string_view text);

}  // namespace forge
