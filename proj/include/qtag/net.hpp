#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "qtag/core.hpp"
#include "qtag/crf.hpp"

namespace qtag {

// Word and character vocabularies; id 0 is UNK in both. Frozen once built.
class Vocab {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocab();
  // Ids follow first appearance across the datasets, in order.
  static Vocab build(const std::vector<const Dataset*>& datasets);
  static Vocab from_lists(std::vector<std::string> words, std::vector<std::string> chars);

  std::size_t word_id(const std::string& word) const;
  std::size_t char_id(const std::string& ch) const;
  std::size_t num_words() const { return words_.size(); }
  std::size_t num_chars() const { return chars_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::string>& chars() const { return chars_; }

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.words_ == b.words_ && a.chars_ == b.chars_;
  }

 private:
  void add_word(const std::string& w);
  void add_char(const std::string& c);

  std::vector<std::string> words_;
  std::vector<std::string> chars_;
  std::unordered_map<std::string, std::size_t> word_ids_;
  std::unordered_map<std::string, std::size_t> char_ids_;
};

struct ModelDims {
  std::size_t word_emb = 100;
  std::size_t char_emb = 25;
  std::size_t char_hidden = 25;  // per direction
  std::size_t word_hidden = 100; // per direction
  std::size_t labels = kNumLabels;

  void validate() const;
  std::size_t gru_input(bool use_char) const { return word_emb + (use_char ? 2 * char_hidden : 0); }
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Gate rows stacked as [input; forget; output; candidate], acting on [x; h].
struct LstmWeights {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

// Gate rows stacked as [update; reset; candidate]. The candidate row block
// of U multiplies (reset * h).
struct GruWeights {
  Eigen::MatrixXd W;
  Eigen::MatrixXd U;
  Eigen::VectorXd b;
};

// Every trainable tensor. Gradients share this type.
struct Weights {
  Eigen::MatrixXd word_emb;  // word_emb x |words|, one column per word
  Eigen::MatrixXd char_emb;  // char_emb x |chars|; empty without char features
  LstmWeights char_fwd, char_bwd;
  GruWeights word_fwd, word_bwd;
  Eigen::MatrixXd proj_W;  // labels x 2*word_hidden
  Eigen::VectorXd proj_b;
  Eigen::VectorXd crf_start;
  Eigen::MatrixXd crf_trans;
  Eigen::VectorXd crf_end;

  // Calls f(name, tensor) for every block in a fixed order.
  template <class F>
  void for_each_block(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void for_each_block(F&& f) const {
    visit(*this, f);
  }

  // Same shapes, all zeros.
  Weights zeros_like() const;
  std::size_t parameter_count() const;
  void add(const Weights& other);

 private:
  template <class Self, class F>
  static void visit(Self& w, F& f) {
    f("word_emb", w.word_emb);
    f("char_emb", w.char_emb);
    f("char_fwd.W", w.char_fwd.W);
    f("char_fwd.b", w.char_fwd.b);
    f("char_bwd.W", w.char_bwd.W);
    f("char_bwd.b", w.char_bwd.b);
    f("word_fwd.W", w.word_fwd.W);
    f("word_fwd.U", w.word_fwd.U);
    f("word_fwd.b", w.word_fwd.b);
    f("word_bwd.W", w.word_bwd.W);
    f("word_bwd.U", w.word_bwd.U);
    f("word_bwd.b", w.word_bwd.b);
    f("proj.W", w.proj_W);
    f("proj.b", w.proj_b);
    f("crf.start", w.crf_start);
    f("crf.trans", w.crf_trans);
    f("crf.end", w.crf_end);
  }
};

struct Model {
  ModelDims dims;
  Vocab vocab;
  Weights weights;
  bool use_char_embedding = true;
  bool use_crf = true;
  TransitionMask mask = build_bio_mask();
  std::string catalog_fingerprint;

  TransitionMatrix transitions() const;
};

// Word vectors loaded from a text embedding file.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<std::string> words;
  Eigen::MatrixXd vectors;  // dim x |words|
  std::unordered_map<std::string, std::size_t> index;

  const double* find(const std::string& word) const {
    auto it = index.find(word);
    return it == index.end() ? nullptr : vectors.col(static_cast<Eigen::Index>(it->second)).data();
  }
};

struct ModelFlags {
  bool use_char_embedding = true;
  bool use_crf = true;
};

// Embeddings uniform in +-sqrt(3/dim); recurrent and projection matrices
// uniform in +-sqrt(6/(rows+cols)); biases and CRF scores zero.
Model init_params(const ModelDims& dims, const Vocab& vocab, const EmbeddingTable* pretrained,
                  std::uint64_t seed, ModelFlags flags = {});

// Final forward state over the characters concatenated with the final
// backward state; 2*char_hidden values.
Eigen::VectorXd char_word_repr(const std::string& word, const Model& model);

Emissions encode_query(const Tokens& tokens, const Model& model);

// Best label sequence: Viterbi under the mask with the CRF, otherwise
// per-token argmax followed by BIO repair.
Labels decode_labels(const Model& model, const Tokens& tokens);

struct TrainOptions {
  double word_dropout = 0.0;  // probability of replacing a word id by UNK
  std::uint64_t seed = 0;
};

struct LossGrads {
  double loss = 0.0;
  Weights grads;
};

// Mean per-query CRF negative log-likelihood, or mean per-token softmax
// cross-entropy without the CRF. Queries are split into kGradShards
// contiguous shards; each shard accumulates in query order and shard
// results are summed in shard order.
inline constexpr std::size_t kGradShards = 4;
LossGrads model_loss_grads(const std::vector<const TaggedQuery*>& batch, const Model& model,
                           const TrainOptions& options = {});
LossGrads model_loss_grads(const std::vector<TaggedQuery>& batch, const Model& model,
                           const TrainOptions& options = {});

// Loss and gradient contribution of a single query, unnormalized:
// `scale` multiplies the query's loss before differentiation.
double accumulate_query_grads(const TaggedQuery& q, const Model& model, double scale,
                              const TrainOptions& options, std::size_t position, Weights& grads);

// Global-norm clipping to `clip`, then weights -= lr * grads. Throws on
// non-finite gradients naming the block.
void sgd_step(Weights& weights, const Weights& grads, double lr, double clip);

}  // namespace qtag
