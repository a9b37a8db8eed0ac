#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace bucketbot {

namespace detail {

// ASCII letters/digits plus any UTF-8 byte, so non-English words survive.
constexpr bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

inline void emit_token(std::string token, std::vector<std::string>& out) {
  if (token.empty()) return;
  if (token.size() >= 3 && token.ends_with("n't")) {
    token.resize(token.size() - 3);
    while (!token.empty() && token.back() == '\'') token.pop_back();
    if (!token.empty()) out.push_back(std::move(token));
    out.emplace_back("not");
    return;
  }
  out.push_back(std::move(token));
}

}  // namespace detail

// Lowercases, turns punctuation into separators (apostrophes survive only
// between two word characters), splits on whitespace and rewrites the "n't"
// contraction as a separate "not" token.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (detail::is_word_byte(c)) {
      current += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
    } else if (c == '\'' && !current.empty() && i + 1 < text.size() &&
               detail::is_word_byte(static_cast<unsigned char>(text[i + 1]))) {
      current += '\'';
    } else {
      detail::emit_token(std::move(current), tokens);
      current.clear();
    }
  }
  detail::emit_token(std::move(current), tokens);
  return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace bucketbot
