#include "qtag/model_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace qtag {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big,
              "mixed-endian hosts are not supported");

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <class T>
  void put(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void put_bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }
  void put_strings(const std::vector<std::string>& xs) {
    put(static_cast<std::uint32_t>(xs.size()));
    for (const auto& s : xs) put_string(s);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <class T>
  T get() {
    T v;
    read(reinterpret_cast<char*>(&v), sizeof v);
    return to_little(v);
  }
  void read(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError("model file is truncated");
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    if (n > (1u << 24)) throw FormatError("model file: implausible string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  std::vector<std::string> get_strings() {
    const auto n = get<std::uint32_t>();
    std::vector<std::string> xs;
    xs.reserve(std::min<std::uint32_t>(n, 1u << 20));
    for (std::uint32_t i = 0; i < n; ++i) xs.push_back(get_string());
    return xs;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_model(const Model& model, std::ostream& out) {
  Writer w(out);
  w.put_bytes(kModelMagic.data(), kModelMagic.size());
  w.put(kModelFormatVersion);
  for (std::size_t d : {model.dims.word_emb, model.dims.char_emb, model.dims.char_hidden,
                        model.dims.word_hidden, model.dims.labels})
    w.put(static_cast<std::uint32_t>(d));
  w.put(static_cast<std::uint8_t>(model.use_char_embedding));
  w.put(static_cast<std::uint8_t>(model.use_crf));
  for (bool b : model.mask.start) w.put(static_cast<std::uint8_t>(b));
  for (const auto& row : model.mask.trans)
    for (bool b : row) w.put(static_cast<std::uint8_t>(b));
  for (bool b : model.mask.end) w.put(static_cast<std::uint8_t>(b));
  w.put_string(model.catalog_fingerprint);
  w.put_strings(model.vocab.words());
  w.put_strings(model.vocab.chars());

  std::uint32_t blocks = 0;
  model.weights.for_each_block([&blocks](std::string_view, const auto&) { ++blocks; });
  w.put(blocks);
  model.weights.for_each_block([&w](std::string_view name, const auto& t) {
    w.put_string(std::string(name));
    w.put(static_cast<std::uint64_t>(t.rows()));
    w.put(static_cast<std::uint64_t>(t.cols()));
    for (Eigen::Index i = 0; i < t.size(); ++i) w.put(t.data()[i]);
  });
  if (!out) throw FormatError("failed writing model");
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  save_model(model, out);
  out.close();
  if (!out) throw FormatError("failed writing " + path.string());
}

Model load_model(std::istream& in) {
  Reader r(in);
  std::array<char, 8> magic{};
  try {
    r.read(magic.data(), magic.size());
  } catch (const FormatError&) {
    throw FormatError("not a model file");
  }
  if (magic != kModelMagic) throw FormatError("not a model file");
  const auto version = r.get<std::uint32_t>();
  if (version != kModelFormatVersion)
    throw FormatError("model format version mismatch: file is version " + std::to_string(version) +
                      ", this reader supports version " + std::to_string(kModelFormatVersion));

  ModelDims dims;
  dims.word_emb = r.get<std::uint32_t>();
  dims.char_emb = r.get<std::uint32_t>();
  dims.char_hidden = r.get<std::uint32_t>();
  dims.word_hidden = r.get<std::uint32_t>();
  dims.labels = r.get<std::uint32_t>();
  ModelFlags flags;
  flags.use_char_embedding = r.get<std::uint8_t>() != 0;
  flags.use_crf = r.get<std::uint8_t>() != 0;
  TransitionMask mask;
  for (auto& b : mask.start) b = r.get<std::uint8_t>() != 0;
  for (auto& row : mask.trans)
    for (auto& b : row) b = r.get<std::uint8_t>() != 0;
  for (auto& b : mask.end) b = r.get<std::uint8_t>() != 0;
  std::string fingerprint = r.get_string();
  auto words = r.get_strings();
  auto chars = r.get_strings();

  Vocab vocab;
  try {
    vocab = Vocab::from_lists(std::move(words), std::move(chars));
    dims.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
  // Shapes come from a zero-seeded skeleton; every tensor is then overwritten.
  Model m = init_params(dims, vocab, nullptr, 0, flags);
  m.mask = mask;
  m.catalog_fingerprint = std::move(fingerprint);

  const auto blocks = r.get<std::uint32_t>();
  std::uint32_t expected = 0;
  m.weights.for_each_block([&expected](std::string_view, const auto&) { ++expected; });
  if (blocks != expected)
    throw FormatError("model file has " + std::to_string(blocks) + " tensors, expected " +
                      std::to_string(expected));
  m.weights.for_each_block([&r](std::string_view name, auto& t) {
    const std::string got = r.get_string();
    if (got != name) throw FormatError("model file: expected tensor " + std::string(name) + ", found " + got);
    const auto rows = r.get<std::uint64_t>(), cols = r.get<std::uint64_t>();
    if (rows != static_cast<std::uint64_t>(t.rows()) || cols != static_cast<std::uint64_t>(t.cols()))
      throw FormatError("model file: tensor " + got + " has the wrong shape");
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = r.get<double>();
  });
  return m;
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file " + path.string());
  return load_model(in);
}

EmbeddingTable load_embeddings(std::istream& in, std::size_t dims) {
  if (dims == 0) throw ValidationError("embedding dimension must be positive");
  EmbeddingTable table;
  table.dim = dims;
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) continue;
    std::vector<double> row;
    std::string field;
    while (ss >> field) {
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (end == field.c_str() || *end != '\0' || !std::isfinite(v))
        throw FormatError("embedding line " + std::to_string(line_no) + ": bad value '" + field + "'");
      row.push_back(v);
    }
    if (line_no == 1 && row.size() == 1 && dims != 1 &&
        word.find_first_not_of("0123456789") == std::string::npos &&
        row[0] == static_cast<double>(dims))
      continue;  // "<count> <dim>" header
    if (row.size() != dims)
      throw FormatError("embedding line " + std::to_string(line_no) + ": expected " +
                        std::to_string(dims) + " values, found " + std::to_string(row.size()));
    if (table.index.contains(word))
      throw FormatError("embedding line " + std::to_string(line_no) + ": duplicate word '" + word + "'");
    table.index.emplace(word, table.words.size());
    table.words.push_back(word);
    values.insert(values.end(), row.begin(), row.end());
  }
  table.vectors = Eigen::Map<Eigen::MatrixXd>(values.data(), static_cast<Eigen::Index>(dims),
                                              static_cast<Eigen::Index>(table.words.size()));
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dims) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open embedding file " + path.string());
  return load_embeddings(in, dims);
}

double vocab_coverage(const EmbeddingTable& table, const std::vector<std::string>& vocab_words) {
  std::size_t total = 0, hit = 0;
  for (const auto& w : vocab_words) {
    if (w == Vocab::kUnkToken) continue;
    ++total;
    hit += table.index.contains(w);
  }
  return total ? 100.0 * static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingTable& table, const std::string& word,
                                        std::size_t k) {
  auto it = table.index.find(word);
  if (it == table.index.end()) throw ValidationError("word '" + word + "' is not in the embedding table");
  const Eigen::VectorXd q = table.vectors.col(static_cast<Eigen::Index>(it->second));
  const double qn = q.norm();
  std::vector<Neighbor> all;
  all.reserve(table.words.size());
  for (std::size_t i = 0; i < table.words.size(); ++i) {
    if (i == it->second) continue;
    const auto v = table.vectors.col(static_cast<Eigen::Index>(i));
    const double denom = qn * v.norm();
    all.push_back({table.words[i], denom > 0.0 ? q.dot(v) / denom : 0.0});
  }
  auto better = [](const Neighbor& a, const Neighbor& b) {
    if (a.cosine != b.cosine) return a.cosine > b.cosine;
    return a.word < b.word;
  };
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), better);
  all.resize(k);
  return all;
}

}  // namespace qtag
