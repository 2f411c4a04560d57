#include "slotfill/text.hpp"

#include <algorithm>
#include <cctype>

#include "slotfill/corpus.hpp"

namespace slotfill {

namespace {

bool is_alnum(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

}  // namespace

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

std::string normalize_answer(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && !is_alnum(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && !is_alnum(static_cast<unsigned char>(text[end - 1]))) --end;

  std::string out;
  out.reserve(end - begin);
  bool pending_space = false;
  for (std::size_t i = begin; i < end; ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::vector<std::string> normalized_tokens(std::string_view text) {
  const std::string normalized = normalize_answer(text);
  if (normalized.empty()) return {};
  return split(normalized, ' ');
}

std::optional<std::size_t> find_token_sequence(std::span<const std::string> haystack,
                                               std::span<const std::string> needle) {
  if (needle.empty() || needle.size() > haystack.size()) return std::nullopt;
  auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end());
  if (it == haystack.end()) return std::nullopt;
  return static_cast<std::size_t>(it - haystack.begin());
}

bool tokens_contain_answer(std::span<const std::string> text_tokens, std::string_view answer) {
  const auto needle = tokenize_words(answer);
  return find_token_sequence(text_tokens, needle).has_value();
}

bool text_contains_answer(std::string_view text, std::string_view answer) {
  const auto haystack = tokenize_words(text);
  return tokens_contain_answer(haystack, answer);
}

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

std::vector<std::string> split(std::string_view text, char delimiter) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(delimiter, start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(text.substr(start));
      break;
    }
    parts.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

}  // namespace slotfill
