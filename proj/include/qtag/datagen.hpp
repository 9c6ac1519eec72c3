#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "qtag/core.hpp"
#include "qtag/rng.hpp"

namespace qtag {

// Entries present in the catalog both as a brand and as a product type.
struct AmbiguousLexicon {
  std::set<std::string> entries;
};

AmbiguousLexicon ambiguous_lexicon(const Catalog& catalog);

// Legacy sequential greedy exact matcher: brands first, then product types;
// longest match at each position, left to right; labeled tokens are never
// relabeled. Also the distant labeler for the noisy set.
TaggedQuery distant_label(const Tokens& tokens, const Catalog& catalog);

// One single-entity query per catalog brand and per product type.
Dataset generate_synthetic(const Catalog& catalog);

// Indices (ascending) of a sample stratified by pattern_of. Quotas are
// proportional to group size with largest-remainder rounding; remainder ties
// go to the larger group, then to the lexicographically smaller pattern.
std::vector<std::size_t> stratified_sample_indices(const Dataset& data, std::size_t n,
                                                   std::uint64_t seed);
Dataset stratified_sample(const Dataset& data, std::size_t n, std::uint64_t seed);

// Per-pattern quotas, exposed for testing the rounding rule.
std::vector<std::size_t> largest_remainder_quotas(const std::vector<std::size_t>& group_sizes,
                                                  std::size_t n);

// For each lexicon entry read both ways in the data, appends uniformly chosen
// duplicates of minority-reading queries until the two counts match.
// Entries are processed in sorted order against the growing output.
Dataset balance_ambiguous(const Dataset& train, const AmbiguousLexicon& lexicon,
                          std::uint64_t seed = 0);

// Number of queries in which `entry` is labeled as BRD and as PRD.
std::pair<std::size_t, std::size_t> reading_counts(const Dataset& data, const std::string& entry);

// Corruption classes applied to noisy queries.
enum class Corruption { BoundaryShift, TypeFlip, Drop };

// Applies one corruption to a random span; returns labels unchanged when the
// query has no entity.
Labels corrupt_labels(const Labels& labels, Corruption kind, Rng& rng);

// Distant-labels each query, then corrupts a `noise_rate` fraction.
// Query i uses the RNG stream derived from (seed, i).
Dataset label_noisy(const std::vector<Tokens>& queries, const Catalog& catalog, double noise_rate,
                    std::uint64_t seed);

// Query templates of the mini-world, modeled on the most frequent entity
// sequence patterns of real search logs.
enum class Template : std::size_t {
  BrdOPrd,       // milwaukee cheap drill
  BrdOPrdO,      // ge 7.4 cu ft dryer gas
  BrdPrdO,       // behr paint discount
  OPrdO,         // bronze faucet pull down
  BrdPrd,        // lg washer
  PrdNegPrd,     // fridge no ice maker (second product type is not shopped)
  BrdPrdForPrd,  // behr paint for fence
  Prd,           // washer
};
inline constexpr std::size_t kNumTemplates = 8;

struct MiniWorldConfig {
  std::size_t n_brands = 50;
  std::size_t n_product_types = 50;
  std::size_t n_golden = 500;
  std::size_t n_noisy = 5000;
  std::size_t n_synthetic = 100;  // capped at |brands| + |product_types|
  double noise_rate = 0.15;
  double ambiguity_rate = 0.1;
  std::vector<double> pattern_weights = {0.22, 0.12, 0.16, 0.12, 0.08, 0.12, 0.12, 0.06};
  std::uint64_t seed = 42;
};

struct MiniWorld {
  Catalog catalog;
  Dataset golden;
  Dataset noisy;
  Dataset synthetic;
};

MiniWorld generate_miniworld(const MiniWorldConfig& config);

}  // namespace qtag
