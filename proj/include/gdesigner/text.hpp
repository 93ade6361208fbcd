#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gdesigner {

/// Whitespace-delimited token count (the mock backends' token model).
std::size_t whitespace_token_count(std::string_view text);

/// Canonical answer form: the payload of the last "Answer:" line if present,
/// otherwise the last whitespace token; trimmed and case-folded.
std::string normalize_answer(std::string_view text);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);

/// FNV-1a over bytes, with a salt to derive independent hash families.
std::uint64_t fnv1a64(std::string_view s, std::uint64_t salt = 0);

} // namespace gdesigner
