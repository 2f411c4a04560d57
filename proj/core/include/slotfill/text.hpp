#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace slotfill {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t hash = kFnvOffsetBasis) noexcept {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= kFnvPrime;
  }
  return hash;
}

std::string hex64(std::uint64_t value);

/// Answer normalizer shared by dataset building, linking and metrics:
/// lowercase, strip non-alphanumeric characters from both edges, collapse
/// internal whitespace runs to one space.
std::string normalize_answer(std::string_view text);

/// normalize_answer(text) split on spaces.
std::vector<std::string> normalized_tokens(std::string_view text);

/// First index at which `needle` occurs contiguously in `haystack`.
std::optional<std::size_t> find_token_sequence(std::span<const std::string> haystack,
                                               std::span<const std::string> needle);

/// True when the tokenized form of `answer` occurs as a contiguous token
/// sequence in the tokenized form of `text`. Empty answers never match.
bool text_contains_answer(std::string_view text, std::string_view answer);
bool tokens_contain_answer(std::span<const std::string> text_tokens, std::string_view answer);

std::string trim(std::string_view text);
std::vector<std::string> split(std::string_view text, char delimiter);

}  // namespace slotfill
