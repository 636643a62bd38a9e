#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace align::text {

std::string_view trim(std::string_view s) noexcept;

/// Removes ASCII punctuation; bytes >= 0x80 (UTF-8 sequences) are kept.
std::string strip_punctuation(std::string_view s);

std::string ascii_lower(std::string_view s);

/// Whitespace tokenization after punctuation stripping.
std::vector<std::string> tokenize(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

}  // namespace align::text
