#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ctxsynth {

std::string_view trim(std::string_view s);
std::string_view trim_left(std::string_view s);

/// Splits on runs of ASCII whitespace; no empty tokens.
std::vector<std::string_view> split_whitespace(std::string_view s);

std::size_t word_count(std::string_view s);

/// Number of UTF-8 code points (continuation bytes are not counted).
std::size_t utf8_length(std::string_view s);

std::string to_lower_ascii(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Integer with comma thousands separators: 2000 -> "2,000".
std::string group_thousands(std::uint64_t value);

/// Replaces every occurrence of `from` with `to`. Single left-to-right pass, so
/// substituted text is never rescanned.
std::string replace_all(std::string_view text, std::string_view from, std::string_view to);

/// Overlapping matches count separately: "aa" occurs 3 times in "aaaa".
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

/// Lowercase hex SHA-256 of `data`, truncated to `hex_chars`.
std::string sha256_hex(std::string_view data, std::size_t hex_chars = 32);

/// First 64 bits of SHA-256; stable across platforms, unlike std::hash.
std::uint64_t stable_hash64(std::string_view data);

/// splitmix64 finalizer; used to derive independent per-sample seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace ctxsynth
