#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Small string helpers used across modules.
namespace sketchfuzz::text {

std::string trim(std::string_view s);
// Collapses every whitespace run into a single space and trims the ends.
std::string collapse_whitespace(std::string_view s);
std::string to_upper(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
bool contains_ci(std::string_view haystack, std::string_view needle);
bool is_ident_char(char c);

// Replaces whole-word occurrences of `word` (case-insensitive when
// `ignore_case`) by `replacement`. Words are maximal runs of
// [A-Za-z0-9_].
std::string replace_word(std::string_view s, std::string_view word,
                         std::string_view replacement, bool ignore_case);

// Tokens of [A-Za-z0-9]+, lower-cased.
std::vector<std::string> word_tokens(std::string_view s);

// First whitespace-delimited token, upper-cased.
std::string first_token_upper(std::string_view s);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view s);
std::string hex64(std::uint64_t v);

// Quotes a SQL string literal ('it''s').
std::string sql_quote(std::string_view s);

} // namespace sketchfuzz::text
