#include <doctest.h>

#include <algorithm>
#include <set>

#include "qtag/core.hpp"
#include "support.hpp"

using namespace qtag;
using qtag::testing::labels;

TEST_CASE("five labels round-trip through their names") {
  std::set<std::string> names;
  for (Label l : kAllLabels) {
    names.insert(std::string(to_string(l)));
    CHECK(parse_label(to_string(l)) == l);
  }
  CHECK(names == std::set<std::string>{"O", "B-BRD", "I-BRD", "B-PRD", "I-PRD"});
  CHECK_THROWS_AS(parse_label("B-COLOR"), ValidationError);
  CHECK(index_of(Label::O) == 0);
  CHECK(index_of(Label::IPrd) == 4);
}

TEST_CASE("bio_decode") {
  CHECK(bio_decode(labels("B-BRD B-PRD O")) ==
        std::vector<EntitySpan>{{EntityType::Brd, 0, 1}, {EntityType::Prd, 1, 2}});
  CHECK(bio_decode(labels("O O O")).empty());
  CHECK(bio_decode(labels("B-PRD I-PRD I-PRD")) == std::vector<EntitySpan>{{EntityType::Prd, 0, 3}});
  CHECK(bio_decode(labels("B-BRD B-BRD")) ==
        std::vector<EntitySpan>{{EntityType::Brd, 0, 1}, {EntityType::Brd, 1, 2}});

  SUBCASE("invalid sequences name the index") {
    for (const char* bad : {"I-BRD", "O I-PRD", "B-BRD I-PRD", "B-PRD I-PRD I-BRD"}) {
      const Labels y = labels(bad);
      CHECK_THROWS_AS(bio_decode(y), ValidationError);
      CHECK(first_bio_violation(y) == y.size() - 1);
      try {
        bio_decode(y);
      } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find(std::to_string(y.size() - 1)) != std::string::npos);
      }
    }
  }
}

TEST_CASE("bio_encode") {
  CHECK(bio_encode({{EntityType::Brd, 0, 1}, {EntityType::Prd, 1, 2}}, 3) == labels("B-BRD B-PRD O"));
  CHECK(bio_encode({}, 2) == labels("O O"));
  CHECK(bio_encode({{EntityType::Brd, 0, 2}}, 2) == labels("B-BRD I-BRD"));
  CHECK_THROWS_AS(bio_encode({{EntityType::Brd, 0, 3}}, 2), ValidationError);
  CHECK_THROWS_AS(bio_encode({{EntityType::Brd, 0, 2}, {EntityType::Prd, 1, 3}}, 3), ValidationError);
  CHECK_THROWS_AS(bio_encode({{EntityType::Brd, 1, 1}}, 3), ValidationError);
}

TEST_CASE("bio codec round-trips both ways on random instances") {
  Rng rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const Labels y = qtag::testing::random_bio(rng, 1 + rng.index(12));
    REQUIRE(is_valid_bio(y));
    const auto spans = bio_decode(y);
    CHECK(bio_encode(spans, y.size()) == y);
    CHECK(bio_decode(bio_encode(spans, y.size())) == spans);
    for (std::size_t i = 1; i < spans.size(); ++i) CHECK(spans[i - 1].end <= spans[i].start);
  }
}

TEST_CASE("repair_bio promotes orphans only") {
  CHECK(repair_bio(labels("I-BRD I-BRD O I-PRD")) == labels("B-BRD I-BRD O B-PRD"));
  CHECK(repair_bio(labels("B-BRD I-PRD")) == labels("B-BRD B-PRD"));
  const Labels ok = labels("B-PRD I-PRD O B-BRD");
  CHECK(repair_bio(ok) == ok);
}

TEST_CASE("pattern_of") {
  CHECK(pattern_of(labels("B-BRD O B-PRD")).to_string() == "BRD+O+PRD");
  CHECK(pattern_of(labels("O O O O")).to_string() == "O");
  CHECK(pattern_of(labels("B-BRD I-BRD B-PRD O")).to_string() == "BRD+PRD+O");
  CHECK(pattern_of(labels("B-BRD B-BRD")).to_string() == "BRD");
  CHECK_THROWS_AS(pattern_of(labels("O I-BRD")), ValidationError);

  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = pattern_of(qtag::testing::random_bio(rng, 1 + rng.index(10)));
    for (std::size_t i = 1; i < p.elements.size(); ++i) CHECK(p.elements[i] != p.elements[i - 1]);
  }
}

TEST_CASE("validate rejects malformed queries") {
  CHECK_NOTHROW(validate(qtag::testing::query("lg washer", "B-BRD B-PRD")));
  CHECK_THROWS_AS(validate(qtag::testing::query("lg washer", "B-BRD")), ValidationError);
  CHECK_THROWS_AS(validate(TaggedQuery{}), ValidationError);
  CHECK_THROWS_AS(validate(qtag::testing::query("lg washer", "O I-PRD")), ValidationError);
}

namespace {

Dataset numbered(std::size_t n) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) d.items.push_back({{"q" + std::to_string(i)}, {Label::O}, Source::Golden});
  return d;
}

std::multiset<std::string> names(const Dataset& d) {
  std::multiset<std::string> out;
  for (const auto& q : d.items) out.insert(q.tokens[0]);
  return out;
}

}  // namespace

TEST_CASE("split_golden sizes and partition") {
  const Dataset golden = numbered(1000);
  const GoldenSplit s = split_golden(golden, 7);
  CHECK(s.test.size() == 150);
  CHECK(s.dev.size() == 85);
  CHECK(s.train.size() == 765);

  auto all = names(s.train);
  for (const auto& n : names(s.dev)) all.insert(n);
  for (const auto& n : names(s.test)) all.insert(n);
  CHECK(all == names(golden));

  const GoldenSplit again = split_golden(golden, 7);
  CHECK(again.test.items == s.test.items);
  CHECK(again.dev.items == s.dev.items);
  CHECK(again.train.items == s.train.items);
  CHECK(split_golden(golden, 8).test.items != s.test.items);

  CHECK_THROWS_AS(split_golden(numbered(10), 7), ValidationError);
  const GoldenSplit small = split_golden(numbered(20), 1);
  CHECK(small.test.size() == 3);
  CHECK(small.dev.size() == 1);
  CHECK(small.train.size() == 16);
}
