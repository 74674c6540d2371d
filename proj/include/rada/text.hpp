#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rada::text {

// Lowercased word tokens. A token is a maximal run of letters or digits;
// non-ASCII code points outside the common punctuation blocks count as
// letters. Lowercasing covers ASCII, Latin-1, Greek and Cyrillic.
std::vector<std::string> word_tokens(std::string_view s);

// Whitespace-separated pieces, untouched.
std::vector<std::string_view> split_whitespace(std::string_view s);

std::string_view trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);
std::string ascii_lower(std::string_view s);

// Case fold + whitespace collapse + trim.
std::string fold_and_collapse(std::string_view s);

// Answer normalization used by token F1 and exact match: lowercase, drop
// ASCII punctuation, drop the articles a/an/the, collapse whitespace.
std::string squad_normalize(std::string_view s);

std::uint64_t fnv1a64(std::string_view s, std::uint64_t basis = 14695981039346656037ULL);

// Hex-encoded SHA-256 of the bytes of s.
std::string sha256_hex(std::string_view s);

}  // namespace rada::text
