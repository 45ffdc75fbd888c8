#pragma once

#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "entail/common.hpp"

namespace entail {

struct TokenizerOptions {
  // Off by default so tokens can match case-sensitive pre-trained vectors.
  bool lowercase = false;
};

namespace detail {

inline bool is_word_char(unsigned char c) {
  // Bytes >= 0x80 are UTF-8 continuation/lead bytes; keep multibyte
  // characters glued together.
  return std::isalnum(c) != 0 || c >= 0x80;
}

// Suffixes split off as their own tokens ("don't" -> "do" + "n't").
inline constexpr std::array<std::string_view, 7> kContractionSuffixes = {
    "n't", "'s", "'re", "'ve", "'ll", "'d", "'m"};

inline bool iequal(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

}  // namespace detail

// Deterministic whitespace split with punctuation detached into single-char
// tokens and a small contraction table. Case is preserved unless lowercasing
// is requested.
inline std::vector<std::string> tokenize(std::string_view text,
                                         const TokenizerOptions& options = {}) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) break;
    std::string_view word = text.substr(i, j - i);
    i = j;

    // peel leading punctuation
    std::size_t lead = 0;
    while (lead < word.size() && !detail::is_word_char(word[lead])) {
      tokens.emplace_back(1, word[lead]);
      ++lead;
    }
    word.remove_prefix(lead);

    // peel trailing punctuation, emitted after the core in original order
    std::vector<char> trailing;
    while (!word.empty() && !detail::is_word_char(word.back())) {
      trailing.push_back(word.back());
      word.remove_suffix(1);
    }

    if (!word.empty()) {
      bool split = false;
      for (std::string_view suffix : detail::kContractionSuffixes) {
        if (word.size() > suffix.size() &&
            detail::iequal(word.substr(word.size() - suffix.size()), suffix)) {
          tokens.emplace_back(word.substr(0, word.size() - suffix.size()));
          tokens.emplace_back(word.substr(word.size() - suffix.size()));
          split = true;
          break;
        }
      }
      if (!split) tokens.emplace_back(word);
    }
    for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) {
      tokens.emplace_back(1, *it);
    }
  }

  if (tokens.empty()) {
    throw FormatError("tokenize: empty or whitespace-only input");
  }
  if (options.lowercase) {
    for (std::string& t : tokens) {
      for (char& c : t) c = char(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  return tokens;
}

}  // namespace entail
