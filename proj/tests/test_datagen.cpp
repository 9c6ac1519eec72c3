#include <doctest.h>

#include <map>

#include "qtag/datagen.hpp"
#include "support.hpp"

using namespace qtag;
using qtag::testing::labels;
using qtag::testing::tokens;

TEST_CASE("legacy matcher reproduces the known mislabelings") {
  CHECK(distant_label(tokens("fridge no ice maker"), Catalog{{}, {"ice maker"}}).labels ==
        labels("O O B-PRD I-PRD"));
  CHECK(distant_label(tokens("weed eater light weight"), Catalog{{"weed eater"}, {"light"}}).labels ==
        labels("B-BRD I-BRD B-PRD O"));
  CHECK(distant_label(tokens("cosco table and chair set"), Catalog{{"cosco"}, {"table"}}).labels ==
        labels("B-BRD B-PRD O O O"));
}

TEST_CASE("distant_label rules") {
  CHECK(distant_label(tokens("a b c"), Catalog{}).labels == labels("O O O"));
  CHECK(distant_label(tokens("a b c"), Catalog{}).source == Source::Noisy);
  // brands win over product types, longest match wins
  CHECK(distant_label(tokens("weed eater"), Catalog{{"weed eater"}, {"weed eater"}}).labels ==
        labels("B-BRD I-BRD"));
  CHECK(distant_label(tokens("ice maker tray"), Catalog{{}, {"ice", "ice maker", "ice maker tray"}}).labels ==
        labels("B-PRD I-PRD I-PRD"));
  // a product type can't claim tokens already labeled brand
  CHECK(distant_label(tokens("black decker drill"), Catalog{{"black decker"}, {"decker drill", "drill"}}).labels ==
        labels("B-BRD I-BRD B-PRD"));
  CHECK_THROWS_AS(distant_label({}, Catalog{}), ValidationError);
}

TEST_CASE("distant_label output is valid BIO on random catalogs") {
  Rng rng(17);
  const std::vector<std::string> words = {"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 500; ++trial) {
    Catalog c;
    for (int k = 0; k < 4; ++k) {
      std::string e = words[rng.index(words.size())];
      if (rng.bernoulli(0.5)) e += " " + words[rng.index(words.size())];
      (rng.bernoulli(0.5) ? c.brands : c.product_types).insert(e);
    }
    Tokens q;
    for (std::size_t i = 0, n = 1 + rng.index(8); i < n; ++i) q.push_back(words[rng.index(words.size())]);
    const auto out = distant_label(q, c);
    REQUIRE(is_valid_bio(out.labels));
    for (const auto& span : bio_decode(out.labels)) {
      const auto& set = span.type == EntityType::Brd ? c.brands : c.product_types;
      CHECK(set.contains(surface(q, span)));
    }
  }
}

TEST_CASE("generate_synthetic covers the catalog") {
  const Dataset d = generate_synthetic(Catalog{{"samsung", "weed eater"}, {"washer"}});
  CHECK(d.role == Source::Synthetic);
  REQUIRE(d.size() == 3);
  CHECK(d.items[0] == TaggedQuery{tokens("samsung"), labels("B-BRD"), Source::Synthetic});
  CHECK(d.items[1] == TaggedQuery{tokens("weed eater"), labels("B-BRD I-BRD"), Source::Synthetic});
  CHECK(d.items[2] == TaggedQuery{tokens("washer"), labels("B-PRD"), Source::Synthetic});
  CHECK_THROWS_AS(generate_synthetic(Catalog{}), ValidationError);
}

TEST_CASE("largest remainder quotas") {
  CHECK(largest_remainder_quotas({5, 3, 2}, 4) == std::vector<std::size_t>{2, 1, 1});
  CHECK(largest_remainder_quotas({80, 20}, 10) == std::vector<std::size_t>{8, 2});
  CHECK(largest_remainder_quotas({1, 1}, 5) == std::vector<std::size_t>{1, 1});
  CHECK(largest_remainder_quotas({}, 5).empty());
  // tie on remainder: larger group first
  CHECK(largest_remainder_quotas({3, 1}, 2) == std::vector<std::size_t>{2, 0});

  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::size_t> sizes;
    std::size_t total = 0;
    for (std::size_t g = 0, n = 1 + rng.index(6); g < n; ++g) {
      sizes.push_back(rng.index(30));
      total += sizes.back();
    }
    const std::size_t n = rng.index(total + 5);
    const auto q = largest_remainder_quotas(sizes, n);
    std::size_t sum = 0;
    for (std::size_t g = 0; g < sizes.size(); ++g) {
      sum += q[g];
      CHECK(q[g] <= sizes[g]);
      if (total > 0 && n <= total) {
        const double exact = static_cast<double>(n) * static_cast<double>(sizes[g]) / static_cast<double>(total);
        CHECK(std::abs(static_cast<double>(q[g]) - exact) < 1.0);
      }
    }
    CHECK(sum == std::min(n, total));
  }
}

namespace {

Dataset pattern_fixture() {
  Dataset d;
  for (int i = 0; i < 80; ++i)
    d.items.push_back(qtag::testing::query("b" + std::to_string(i) + " cheap drill", "B-BRD O B-PRD"));
  for (int i = 0; i < 20; ++i)
    d.items.push_back(qtag::testing::query("bronze faucet" + std::to_string(i), "O B-PRD"));
  return d;
}

std::map<std::string, std::size_t> pattern_counts(const Dataset& d) {
  std::map<std::string, std::size_t> out;
  for (const auto& q : d.items) ++out[pattern_of(q.labels).to_string()];
  return out;
}

}  // namespace

TEST_CASE("stratified_sample") {
  const Dataset d = pattern_fixture();
  const Dataset s = stratified_sample(d, 10, 3);
  CHECK(pattern_counts(s) == std::map<std::string, std::size_t>{{"BRD+O+PRD", 8}, {"O+PRD", 2}});
  CHECK(stratified_sample(d, 10, 3).items == s.items);
  CHECK(stratified_sample(d, 100, 3).items == d.items);
  CHECK(stratified_sample(d, 500, 3).items == d.items);
  CHECK(stratified_sample(d, 0, 3).empty());

  const auto idx = stratified_sample_indices(d, 37, 9);
  CHECK(std::is_sorted(idx.begin(), idx.end()));
  CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
  CHECK(idx.size() == 37);

  // within-group selection is roughly uniform
  std::vector<int> hits(d.size(), 0);
  for (std::uint64_t seed = 0; seed < 400; ++seed)
    for (auto i : stratified_sample_indices(d, 10, seed)) ++hits[i];
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(hits[i] > 10);  // expectation 40
}

TEST_CASE("balance_ambiguous") {
  Dataset d;
  for (int i = 0; i < 10; ++i) d.items.push_back(qtag::testing::query("anchor bolt" + std::to_string(i), "B-BRD O"));
  for (int i = 0; i < 2; ++i) d.items.push_back(qtag::testing::query("boat" + std::to_string(i) + " anchor", "O B-PRD"));
  d.items.push_back(qtag::testing::query("lg washer", "B-BRD B-PRD"));
  const AmbiguousLexicon lex{{"anchor"}};

  const Dataset b = balance_ambiguous(d, lex, 1);
  CHECK(b.size() == d.size() + 8);
  CHECK(std::equal(d.items.begin(), d.items.end(), b.items.begin()));
  for (std::size_t i = d.size(); i < b.size(); ++i) CHECK(b.items[i].labels == labels("O B-PRD"));
  CHECK(reading_counts(b, "anchor") == std::pair<std::size_t, std::size_t>{10, 10});

  CHECK(balance_ambiguous(d, AmbiguousLexicon{}, 1).items == d.items);
  Dataset brand_only;
  brand_only.items.assign(d.items.begin(), d.items.begin() + 10);
  CHECK(balance_ambiguous(brand_only, lex, 1).items == brand_only.items);
}

TEST_CASE("corrupt_labels produces the three failure classes") {
  Rng rng(4);
  const Labels y = labels("B-BRD O B-PRD I-PRD O");
  for (int trial = 0; trial < 200; ++trial) {
    const Labels flip = corrupt_labels(y, Corruption::TypeFlip, rng);
    CHECK(is_valid_bio(flip));
    CHECK(bio_decode(flip).size() == 2);
    CHECK(flip != y);
    const Labels drop = corrupt_labels(y, Corruption::Drop, rng);
    CHECK(bio_decode(drop).size() == 1);
    const Labels shift = corrupt_labels(y, Corruption::BoundaryShift, rng);
    CHECK(is_valid_bio(shift));
    CHECK(shift != y);
  }
  CHECK(corrupt_labels(labels("O O"), Corruption::Drop, rng) == labels("O O"));
}

TEST_CASE("label_noisy") {
  const Catalog c{{"lg"}, {"washer"}};
  const std::vector<Tokens> qs = {tokens("lg washer"), tokens("washer mini"), tokens("lg")};
  const Dataset clean = label_noisy(qs, c, 0.0, 1);
  for (std::size_t i = 0; i < qs.size(); ++i) CHECK(clean.items[i] == distant_label(qs[i], c));
  const Dataset all = label_noisy(qs, c, 1.0, 1);
  for (std::size_t i = 0; i < qs.size(); ++i) CHECK(all.items[i].labels != clean.items[i].labels);
  CHECK(label_noisy(qs, c, 0.5, 9).items == label_noisy(qs, c, 0.5, 9).items);
  CHECK_THROWS_AS(label_noisy(qs, c, 1.5, 1), ValidationError);
}

TEST_CASE("mini-world generation") {
  MiniWorldConfig cfg;
  cfg.n_golden = 120;
  cfg.n_noisy = 400;
  cfg.seed = 1;
  const MiniWorld a = generate_miniworld(cfg);
  const MiniWorld b = generate_miniworld(cfg);
  CHECK(a.catalog.brands == b.catalog.brands);
  CHECK(a.golden.items == b.golden.items);
  CHECK(a.noisy.items == b.noisy.items);
  CHECK(a.synthetic.items == b.synthetic.items);

  CHECK(a.catalog.brands.size() == 50);
  CHECK(a.catalog.product_types.size() == 50);
  CHECK(a.catalog.brands.contains("lg"));
  CHECK(a.catalog.product_types.contains("washer"));
  CHECK(ambiguous_lexicon(a.catalog).entries.size() == 5);
  CHECK(a.synthetic.size() == 100);
  CHECK(a.golden.size() == 120);
  CHECK(a.noisy.size() == 400);

  std::set<Tokens> golden_texts;
  for (const auto& q : a.golden.items) {
    validate(q);
    CHECK(q.source == Source::Golden);
    golden_texts.insert(q.tokens);
  }
  for (const auto& q : a.noisy.items) {
    validate(q);
    CHECK(!golden_texts.contains(q.tokens));
  }

  cfg.noise_rate = 0.0;
  const MiniWorld clean = generate_miniworld(cfg);
  for (const auto& q : clean.noisy.items) CHECK(q == distant_label(q.tokens, clean.catalog));

  cfg.n_synthetic = 30;
  CHECK(generate_miniworld(cfg).synthetic.size() == 30);

  MiniWorldConfig bad;
  bad.n_brands = 1;
  CHECK_THROWS_AS(generate_miniworld(bad), ValidationError);
  bad = MiniWorldConfig{};
  bad.noise_rate = -0.1;
  CHECK_THROWS_AS(generate_miniworld(bad), ValidationError);
  bad = MiniWorldConfig{};
  bad.pattern_weights = {1.0};
  CHECK_THROWS_AS(generate_miniworld(bad), ValidationError);
}
