#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// Small UTF-8 and normalization helpers shared across modules.
namespace pageguide::text {

/// True iff `s` is well-formed UTF-8 (no overlongs, no surrogates).
bool is_valid_utf8(std::string_view s) noexcept;

/// Decodes UTF-8; malformed bytes decode to U+FFFD.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);
void append_utf8(std::string& out, char32_t cp);

/// Number of code points.
std::size_t length(std::string_view s) noexcept;

/// Prefix of at most `n` code points.
std::string clip(std::string_view s, std::size_t n);

bool is_space(char32_t c) noexcept;
bool is_punct(char32_t c) noexcept;

/// Simple case fold: ASCII, Latin-1, Greek and Cyrillic basic blocks.
/// Always maps one code point to one code point.
char32_t fold_case(char32_t c) noexcept;
std::u32string fold_case(std::u32string_view s);
std::string to_lower_ascii(std::string_view s);

/// Collapses whitespace runs (incl. NBSP) to one space and trims both ends.
std::string collapse_whitespace(std::string_view s);

std::string_view trim(std::string_view s) noexcept;

/// Lowercase, strip punctuation, split on whitespace.
std::vector<std::string> answer_tokens(std::string_view s);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

}  // namespace pageguide::text
