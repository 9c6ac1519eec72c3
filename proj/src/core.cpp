#include "qtag/core.hpp"

#include <numeric>

#include "qtag/rng.hpp"

namespace qtag {

std::string_view to_string(Label l) {
  switch (l) {
    case Label::O: return "O";
    case Label::BBrd: return "B-BRD";
    case Label::IBrd: return "I-BRD";
    case Label::BPrd: return "B-PRD";
    case Label::IPrd: return "I-PRD";
  }
  return "?";
}

std::string_view to_string(EntityType t) { return t == EntityType::Brd ? "BRD" : "PRD"; }

std::string_view to_string(Source s) {
  switch (s) {
    case Source::Golden: return "GOLDEN";
    case Source::Noisy: return "NOISY";
    case Source::Synthetic: return "SYNTHETIC";
    case Source::Predicted: return "PREDICTED";
  }
  return "?";
}

Label parse_label(std::string_view s) {
  for (Label l : kAllLabels)
    if (to_string(l) == s) return l;
  throw ValidationError("unknown label '" + std::string(s) + "'");
}

Source parse_source(std::string_view s) {
  for (Source src : {Source::Golden, Source::Noisy, Source::Synthetic, Source::Predicted})
    if (to_string(src) == s) return src;
  throw ValidationError("unknown dataset role '" + std::string(s) + "'");
}

std::string SeqPattern::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < elements.size(); ++i) {
    if (i) out += '+';
    switch (elements[i]) {
      case PatternElem::Brd: out += "BRD"; break;
      case PatternElem::Prd: out += "PRD"; break;
      case PatternElem::O: out += "O"; break;
    }
  }
  return out;
}

std::optional<std::size_t> first_bio_violation(const Labels& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!is_inside(labels[i])) continue;
    if (i == 0 || labels[i - 1] == Label::O || type_of(labels[i - 1]) != type_of(labels[i]))
      return i;
  }
  return std::nullopt;
}

bool is_valid_bio(const Labels& labels) { return !first_bio_violation(labels).has_value(); }

void require_valid_bio(const Labels& labels) {
  if (auto bad = first_bio_violation(labels)) {
    throw ValidationError("invalid BIO sequence at index " + std::to_string(*bad) + " (" +
                          std::string(to_string(labels[*bad])) + ")");
  }
}

void validate(const TaggedQuery& q) {
  if (q.tokens.empty()) throw ValidationError("empty query");
  if (q.tokens.size() != q.labels.size())
    throw ValidationError("token/label length mismatch: " + std::to_string(q.tokens.size()) +
                          " tokens, " + std::to_string(q.labels.size()) + " labels");
  require_valid_bio(q.labels);
}

Labels repair_bio(Labels labels) {
  while (auto bad = first_bio_violation(labels)) labels[*bad] = begin_of(type_of(labels[*bad]));
  return labels;
}

std::vector<EntitySpan> bio_decode(const Labels& labels) {
  require_valid_bio(labels);
  std::vector<EntitySpan> spans;
  for (std::size_t i = 0; i < labels.size();) {
    if (labels[i] == Label::O) {
      ++i;
      continue;
    }
    const EntityType t = type_of(labels[i]);
    std::size_t j = i + 1;
    while (j < labels.size() && labels[j] == inside_of(t)) ++j;
    spans.push_back({t, i, j});
    i = j;
  }
  return spans;
}

Labels bio_encode(const std::vector<EntitySpan>& spans, std::size_t length) {
  Labels out(length, Label::O);
  std::size_t prev_end = 0;
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const auto& s = spans[k];
    if (s.start >= s.end || s.end > length)
      throw ValidationError("span " + std::to_string(k) + " out of range");
    if (k > 0 && s.start < prev_end)
      throw ValidationError("span " + std::to_string(k) + " overlaps or is unsorted");
    out[s.start] = begin_of(s.type);
    for (std::size_t i = s.start + 1; i < s.end; ++i) out[i] = inside_of(s.type);
    prev_end = s.end;
  }
  return out;
}

SeqPattern pattern_of(const Labels& labels) {
  require_valid_bio(labels);
  SeqPattern p;
  for (Label l : labels) {
    PatternElem e = l == Label::O ? PatternElem::O
                    : type_of(l) == EntityType::Brd ? PatternElem::Brd
                                                    : PatternElem::Prd;
    // A new B- of the same type as the previous entity still collapses:
    // the pattern tracks classes, not entity counts.
    if (p.elements.empty() || p.elements.back() != e) p.elements.push_back(e);
  }
  return p;
}

std::string join(const Tokens& tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

std::string surface(const Tokens& tokens, const EntitySpan& span) {
  std::string out;
  for (std::size_t i = span.start; i < span.end; ++i) {
    if (i > span.start) out += ' ';
    out += tokens[i];
  }
  return out;
}

GoldenSplit split_golden(const Dataset& golden, std::uint64_t seed) {
  const std::size_t n = golden.size();
  if (n < 20)
    throw ValidationError("golden dataset too small to split: " + std::to_string(n) +
                          " items (need at least 20)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  const std::size_t n_test = n * 15 / 100;
  const std::size_t n_dev = (n - n_test) / 10;

  GoldenSplit split;
  split.train.role = split.dev.role = split.test.role = golden.role;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& item = golden.items[order[k]];
    if (k < n_test)
      split.test.items.push_back(item);
    else if (k < n_test + n_dev)
      split.dev.items.push_back(item);
    else
      split.train.items.push_back(item);
  }
  return split;
}

}  // namespace qtag
