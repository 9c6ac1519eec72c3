#include "qtag/preprocess.hpp"

namespace qtag {

namespace {

bool ascii_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

Tokens normalize_query(std::string_view raw, const NormalizationConfig& config) {
  std::string cleaned;
  cleaned.reserve(raw.size());
  for (char ch : raw) {
    auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || ascii_alnum(c) || config.keep_chars.find(ch) != std::string::npos) {
      if (config.lowercase && c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
      cleaned.push_back(static_cast<char>(c));
    } else {
      cleaned.push_back(' ');
    }
  }

  Tokens tokens;
  std::string cur;
  for (char ch : cleaned) {
    if (ascii_space(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  if (tokens.empty()) throw EmptyQueryError();
  return tokens;
}

std::vector<std::string> utf8_chars(std::string_view word) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < word.size();) {
    auto c = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if (c >= 0xF0 && c < 0xF8)
      len = 4;
    else if (c >= 0xE0)
      len = c < 0xF0 ? 3 : 1;
    else if (c >= 0xC0)
      len = 2;
    if (i + len > word.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(word[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.emplace_back(word.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace qtag
