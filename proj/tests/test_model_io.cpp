#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "qtag/model_io.hpp"
#include "qtag/train.hpp"
#include "support.hpp"

using namespace qtag;
using namespace qtag::testing;

namespace {

Model random_model(ModelFlags flags = {}) {
  Dataset d;
  d.items = {query("lg washer mini", "B-BRD B-PRD O"), query("caf\xc3\xa9 table", "O B-PRD")};
  Model m = init_params(ModelDims{4, 3, 2, 5, kNumLabels}, Vocab::build({&d}), nullptr, 8, flags);
  Rng rng(1);
  m.weights.for_each_block([&](std::string_view, auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-1, 1);
  });
  m.catalog_fingerprint = "0123456789abcdef";
  return m;
}

std::string bytes_of(const Model& m) {
  std::ostringstream out(std::ios::binary);
  save_model(m, out);
  return out.str();
}

Model from_bytes(const std::string& b) {
  std::istringstream in(b, std::ios::binary);
  return load_model(in);
}

}  // namespace

TEST_CASE("model save/load round-trip") {
  for (ModelFlags flags : {ModelFlags{true, true}, ModelFlags{false, false}}) {
    const Model m = random_model(flags);
    const std::string b = bytes_of(m);
    CHECK(b.compare(0, 8, "QTAGMODL") == 0);
    const Model back = from_bytes(b);
    CHECK(back.dims == m.dims);
    CHECK(back.vocab == m.vocab);
    CHECK(back.use_char_embedding == m.use_char_embedding);
    CHECK(back.use_crf == m.use_crf);
    CHECK(back.mask == m.mask);
    CHECK(back.catalog_fingerprint == m.catalog_fingerprint);
    CHECK(bytes_of(back) == b);

    Rng rng(3);
    const std::vector<std::string> words = {"lg", "washer", "mini", "caf\xc3\xa9", "zz", "table"};
    for (int i = 0; i < 100; ++i) {
      Tokens t;
      for (std::size_t k = 0, n = 1 + rng.index(6); k < n; ++k) t.push_back(words[rng.index(words.size())]);
      const Emissions a = encode_query(t, m), c = encode_query(t, back);
      CHECK(std::memcmp(a.data(), c.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0);
      CHECK(decode_labels(m, t) == decode_labels(back, t));
    }
  }
}

TEST_CASE("model file errors") {
  const std::string b = bytes_of(random_model());
  std::string bad_magic = b;
  bad_magic[0] = 'X';
  CHECK_THROWS_WITH_AS(from_bytes(bad_magic), "not a model file", FormatError);
  CHECK_THROWS_WITH_AS(from_bytes("QT"), "not a model file", FormatError);

  std::string v2 = b;
  v2[8] = 2;  // little-endian u32 version follows the magic
  CHECK_THROWS_WITH_AS(from_bytes(v2), doctest::Contains("version mismatch"), FormatError);

  CHECK_THROWS_AS(from_bytes(b.substr(0, b.size() - 3)), FormatError);
  CHECK_THROWS_AS(load_model(std::filesystem::path("/nonexistent/model.bin")), FormatError);

  const auto path = std::filesystem::temp_directory_path() / "qtag_model_test.bin";
  save_model(random_model(), path);
  CHECK(bytes_of(load_model(path)) == b);
  std::filesystem::remove(path);
}

TEST_CASE("load_embeddings") {
  {
    std::istringstream in("washer 0.1 0.2\nlg -1 2.5\n");
    const EmbeddingTable t = load_embeddings(in, 2);
    CHECK(t.words == std::vector<std::string>{"washer", "lg"});
    CHECK(t.vectors(0, 0) == 0.1);
    CHECK(t.vectors(1, 0) == 0.2);
    CHECK(t.find("lg")[1] == 2.5);
    CHECK(t.find("nope") == nullptr);
  }
  {
    std::istringstream in("2 2\nwasher 0.1 0.2\nlg 1 2\n");
    CHECK(load_embeddings(in, 2).words.size() == 2);
  }
  std::istringstream wide("washer 0.1 0.2\nlg 1 2 3\n");
  CHECK_THROWS_WITH_AS(load_embeddings(wide, 2), doctest::Contains("line 2"), FormatError);
  std::istringstream junk("washer 0.1 abc\n");
  CHECK_THROWS_WITH_AS(load_embeddings(junk, 2), doctest::Contains("line 1"), FormatError);
  CHECK_THROWS_AS(load_embeddings(std::filesystem::path("/nonexistent.vec"), 2), FormatError);
}

TEST_CASE("vocabulary coverage") {
  EmbeddingTable t;
  t.dim = 1;
  std::vector<std::string> vocab = {"<unk>"};
  for (int i = 0; i < 1000; ++i) {
    const std::string w = "w" + std::to_string(i);
    vocab.push_back(w);
    if (i != 0) {
      t.index.emplace(w, t.words.size());
      t.words.push_back(w);
    }
  }
  CHECK(vocab_coverage(t, vocab) == doctest::Approx(99.9).epsilon(1e-12));
}

TEST_CASE("nearest_neighbors") {
  std::istringstream in("a 1 0\nb 1 0\nc 0 1\n");
  const EmbeddingTable t = load_embeddings(in, 2);
  const auto n = nearest_neighbors(t, "a", 1);
  REQUIRE(n.size() == 1);
  CHECK(n[0].word == "b");
  CHECK(n[0].cosine == doctest::Approx(1.0));
  CHECK_THROWS_AS(nearest_neighbors(t, "zz", 1), ValidationError);

  Rng rng(2);
  EmbeddingTable toy;
  toy.dim = 3;
  toy.vectors.resize(3, 5);
  for (int i = 0; i < 5; ++i) {
    toy.words.push_back(std::string(1, static_cast<char>('p' + i)));
    toy.index.emplace(toy.words.back(), i);
    for (int k = 0; k < 3; ++k) toy.vectors(k, i) = rng.uniform(-1, 1);
  }
  // exhaustive ranking oracle
  for (int q = 0; q < 5; ++q) {
    std::vector<std::pair<double, std::string>> all;
    for (int i = 0; i < 5; ++i) {
      if (i == q) continue;
      double dot = 0, nq = 0, ni = 0;
      for (int k = 0; k < 3; ++k) {
        dot += toy.vectors(k, q) * toy.vectors(k, i);
        nq += toy.vectors(k, q) * toy.vectors(k, q);
        ni += toy.vectors(k, i) * toy.vectors(k, i);
      }
      all.emplace_back(-dot / std::sqrt(nq * ni), toy.words[i]);
    }
    std::sort(all.begin(), all.end());
    const auto got = nearest_neighbors(toy, toy.words[q], 10);
    REQUIRE(got.size() == 4);
    for (int i = 0; i < 4; ++i) {
      CHECK(got[i].word == all[i].second);
      CHECK(got[i].cosine == doctest::Approx(-all[i].first).epsilon(1e-12));
    }
    // positive rescaling of any row leaves the ranking unchanged
    EmbeddingTable scaled = toy;
    scaled.vectors.col(2) *= 7.5;
    const auto again = nearest_neighbors(scaled, toy.words[q], 10);
    for (int i = 0; i < 4; ++i) CHECK(again[i].word == got[i].word);
  }
}
