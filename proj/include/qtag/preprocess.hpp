#pragma once

#include <string>
#include <string_view>

#include "qtag/core.hpp"

namespace qtag {

class EmptyQueryError : public ValidationError {
 public:
  EmptyQueryError() : ValidationError("empty query") {}
};

struct NormalizationConfig {
  bool lowercase = true;
  // Token output never contains empty tokens, so runs of separators always
  // collapse; the flag is kept for config-file compatibility.
  bool collapse_whitespace = true;
  // ASCII punctuation kept besides letters and digits. Non-ASCII bytes
  // (UTF-8 letters) are always kept.
  std::string keep_chars = ".-&'/";
};

// Lowercases, replaces stripped characters with spaces, and splits on
// whitespace. Throws EmptyQueryError when nothing survives.
Tokens normalize_query(std::string_view raw, const NormalizationConfig& config = {});

// Splits a UTF-8 string into code point substrings; invalid bytes become
// single-byte pieces.
std::vector<std::string> utf8_chars(std::string_view word);

}  // namespace qtag
