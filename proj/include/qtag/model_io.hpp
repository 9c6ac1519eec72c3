#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "qtag/dataset_io.hpp"
#include "qtag/net.hpp"

namespace qtag {

// Single-file model format, all integers and floats little-endian:
//   magic "QTAGMODL", u32 version, u32 dims x5, u8 use_char, u8 use_crf,
//   mask bytes (start K, trans KxK row-major, end K), catalog fingerprint,
//   word list, char list (u32 count, then u32-length-prefixed UTF-8 each),
//   u32 block count, then per block: name, u64 rows, u64 cols, f64 data in
//   column-major order.
inline constexpr std::array<char, 8> kModelMagic = {'Q', 'T', 'A', 'G', 'M', 'O', 'D', 'L'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(const Model& model, std::ostream& out);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(std::istream& in);
Model load_model(const std::filesystem::path& path);

// Text embeddings, one "<word> <v1> ... <vd>" line per word. A leading
// "<count> <dim>" header line is skipped when dim matches. Malformed lines
// raise FormatError with the line number.
EmbeddingTable load_embeddings(std::istream& in, std::size_t dims);
EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dims);

// Percentage (0-100) of vocabulary words, UNK excluded, present in the table.
double vocab_coverage(const EmbeddingTable& table, const std::vector<std::string>& vocab_words);

struct Neighbor {
  std::string word;
  double cosine;
};

// Top-k by cosine similarity, excluding the query word; ties resolve to the
// lexicographically smaller word. Zero vectors have cosine 0 with anything.
std::vector<Neighbor> nearest_neighbors(const EmbeddingTable& table, const std::string& word,
                                        std::size_t k);

}  // namespace qtag
