#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qtag {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Label index order is fixed; Viterbi tie-breaking depends on it.
enum class Label : std::uint8_t { O = 0, BBrd = 1, IBrd = 2, BPrd = 3, IPrd = 4 };
inline constexpr std::size_t kNumLabels = 5;
inline constexpr std::array<Label, kNumLabels> kAllLabels = {Label::O, Label::BBrd, Label::IBrd,
                                                            Label::BPrd, Label::IPrd};

enum class EntityType : std::uint8_t { Brd, Prd };

enum class Source : std::uint8_t { Golden, Noisy, Synthetic, Predicted };

std::string_view to_string(Label l);
std::string_view to_string(EntityType t);
std::string_view to_string(Source s);
Label parse_label(std::string_view s);
Source parse_source(std::string_view s);

constexpr std::size_t index_of(Label l) { return static_cast<std::size_t>(l); }
constexpr Label label_at(std::size_t k) { return static_cast<Label>(k); }

constexpr bool is_begin(Label l) { return l == Label::BBrd || l == Label::BPrd; }
constexpr bool is_inside(Label l) { return l == Label::IBrd || l == Label::IPrd; }
// Entity type of a non-O label.
constexpr EntityType type_of(Label l) {
  return (l == Label::BBrd || l == Label::IBrd) ? EntityType::Brd : EntityType::Prd;
}
constexpr Label begin_of(EntityType t) { return t == EntityType::Brd ? Label::BBrd : Label::BPrd; }
constexpr Label inside_of(EntityType t) { return t == EntityType::Brd ? Label::IBrd : Label::IPrd; }

// Half-open token range [start, end).
struct EntitySpan {
  EntityType type;
  std::size_t start;
  std::size_t end;

  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
};

using Tokens = std::vector<std::string>;
using Labels = std::vector<Label>;

struct TaggedQuery {
  Tokens tokens;
  Labels labels;
  Source source = Source::Golden;

  friend bool operator==(const TaggedQuery&, const TaggedQuery&) = default;
};

struct Dataset {
  Source role = Source::Golden;
  std::vector<TaggedQuery> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
};

struct GoldenSplit {
  Dataset train;
  Dataset dev;
  Dataset test;
};

// Ground-truth entity strings, each the space-joined normalized tokens.
struct Catalog {
  std::set<std::string> brands;
  std::set<std::string> product_types;

  bool empty() const { return brands.empty() && product_types.empty(); }
};

enum class PatternElem : std::uint8_t { Brd, Prd, O };

struct SeqPattern {
  std::vector<PatternElem> elements;

  std::string to_string() const;  // e.g. "BRD+O+PRD"
  friend bool operator==(const SeqPattern&, const SeqPattern&) = default;
  friend auto operator<=>(const SeqPattern&, const SeqPattern&) = default;
};

// Returns the index of the first label that breaks BIO validity, if any.
std::optional<std::size_t> first_bio_violation(const Labels& labels);
bool is_valid_bio(const Labels& labels);
// Throws ValidationError naming the offending index.
void require_valid_bio(const Labels& labels);
// Checks length agreement, non-emptiness, and BIO validity.
void validate(const TaggedQuery& q);

// Promotes orphan I-X (and type switches inside a run) to B-X.
Labels repair_bio(Labels labels);

std::vector<EntitySpan> bio_decode(const Labels& labels);
Labels bio_encode(const std::vector<EntitySpan>& spans, std::size_t length);

SeqPattern pattern_of(const Labels& labels);

// Space-joined surface form of a span.
std::string surface(const Tokens& tokens, const EntitySpan& span);
std::string join(const Tokens& tokens, std::string_view sep = " ");

// 15% test, then 90/10 train/dev of the remainder, floor rounding.
GoldenSplit split_golden(const Dataset& golden, std::uint64_t seed);

}  // namespace qtag
