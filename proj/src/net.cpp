#include "qtag/net.hpp"

#include <cmath>

#include "qtag/preprocess.hpp"
#include "qtag/rng.hpp"

namespace qtag {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() {
  add_word(std::string(kUnkToken));
  add_char(std::string(kUnkToken));
}

void Vocab::add_word(const std::string& w) {
  if (word_ids_.emplace(w, words_.size()).second) words_.push_back(w);
}

void Vocab::add_char(const std::string& c) {
  if (char_ids_.emplace(c, chars_.size()).second) chars_.push_back(c);
}

Vocab Vocab::build(const std::vector<const Dataset*>& datasets) {
  Vocab v;
  for (const Dataset* d : datasets) {
    for (const auto& q : d->items) {
      for (const auto& tok : q.tokens) {
        v.add_word(tok);
        for (const auto& ch : utf8_chars(tok)) v.add_char(ch);
      }
    }
  }
  return v;
}

Vocab Vocab::from_lists(std::vector<std::string> words, std::vector<std::string> chars) {
  if (words.empty() || words[0] != kUnkToken || chars.empty() || chars[0] != kUnkToken)
    throw ValidationError("vocabulary lists must start with " + std::string(kUnkToken));
  Vocab v;
  for (std::size_t i = 1; i < words.size(); ++i) v.add_word(words[i]);
  for (std::size_t i = 1; i < chars.size(); ++i) v.add_char(chars[i]);
  if (v.words_.size() != words.size() || v.chars_.size() != chars.size())
    throw ValidationError("vocabulary lists contain duplicates");
  return v;
}

std::size_t Vocab::word_id(const std::string& word) const {
  auto it = word_ids_.find(word);
  return it == word_ids_.end() ? kUnk : it->second;
}

std::size_t Vocab::char_id(const std::string& ch) const {
  auto it = char_ids_.find(ch);
  return it == char_ids_.end() ? kUnk : it->second;
}

// ---------------------------------------------------------------------------
// Dims, weights

void ModelDims::validate() const {
  if (word_emb == 0 || char_emb == 0 || char_hidden == 0 || word_hidden == 0)
    throw ValidationError("model dimensions must be positive");
  if (labels != kNumLabels) throw ValidationError("label count must be " + std::to_string(kNumLabels));
}

Weights Weights::zeros_like() const {
  Weights z = *this;
  z.for_each_block([](std::string_view, auto& t) { t.setZero(); });
  return z;
}

std::size_t Weights::parameter_count() const {
  std::size_t n = 0;
  for_each_block([&n](std::string_view, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

void Weights::add(const Weights& other) {
  std::vector<const double*> src;
  other.for_each_block([&src](std::string_view, const auto& t) { src.push_back(t.data()); });
  std::size_t k = 0;
  for_each_block([&](std::string_view, auto& t) {
    const double* s = src[k++];
    double* d = t.data();
    for (Index i = 0; i < t.size(); ++i) d[i] += s[i];
  });
}

TransitionMatrix Model::transitions() const {
  TransitionMatrix t;
  t.start = weights.crf_start;
  t.trans = weights.crf_trans;
  t.end = weights.crf_end;
  t.mask = mask;
  return t;
}

namespace {

void fill_uniform(MatrixXd& m, double limit, Rng& rng) {
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
}

void glorot(MatrixXd& m, Rng& rng) {
  fill_uniform(m, std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols())), rng);
}

}  // namespace

Model init_params(const ModelDims& dims, const Vocab& vocab, const EmbeddingTable* pretrained,
                  std::uint64_t seed, ModelFlags flags) {
  dims.validate();
  if (pretrained && pretrained->dim != dims.word_emb)
    throw ValidationError("pretrained embedding width " + std::to_string(pretrained->dim) +
                          " does not match word_emb " + std::to_string(dims.word_emb));
  Model m;
  m.dims = dims;
  m.vocab = vocab;
  m.use_char_embedding = flags.use_char_embedding;
  m.use_crf = flags.use_crf;

  const auto Dw = static_cast<Index>(dims.word_emb), Dc = static_cast<Index>(dims.char_emb);
  const auto Hc = static_cast<Index>(dims.char_hidden), Hw = static_cast<Index>(dims.word_hidden);
  const auto K = static_cast<Index>(kNumLabels);
  const auto In = static_cast<Index>(dims.gru_input(flags.use_char_embedding));
  Weights& w = m.weights;

  std::uint64_t stream = 0;
  auto next_rng = [&] { return Rng::derive(seed, stream++); };

  {
    Rng rng = next_rng();
    w.word_emb.resize(Dw, static_cast<Index>(vocab.num_words()));
    fill_uniform(w.word_emb, std::sqrt(3.0 / static_cast<double>(Dw)), rng);
    if (pretrained) {
      for (std::size_t i = 0; i < vocab.num_words(); ++i) {
        if (const double* row = pretrained->find(vocab.words()[i]))
          w.word_emb.col(static_cast<Index>(i)) = Eigen::Map<const VectorXd>(row, Dw);
      }
    }
  }
  if (flags.use_char_embedding) {
    Rng rng = next_rng();
    w.char_emb.resize(Dc, static_cast<Index>(vocab.num_chars()));
    fill_uniform(w.char_emb, std::sqrt(3.0 / static_cast<double>(Dc)), rng);
    for (LstmWeights* lw : {&w.char_fwd, &w.char_bwd}) {
      Rng r = next_rng();
      lw->W.resize(4 * Hc, Dc + Hc);
      glorot(lw->W, r);
      lw->b = VectorXd::Zero(4 * Hc);
    }
  } else {
    stream += 3;
    w.char_emb.resize(0, 0);
    w.char_fwd = w.char_bwd = LstmWeights{MatrixXd(0, 0), VectorXd(0)};
  }
  for (GruWeights* gw : {&w.word_fwd, &w.word_bwd}) {
    Rng r = next_rng();
    gw->W.resize(3 * Hw, In);
    glorot(gw->W, r);
    gw->U.resize(3 * Hw, Hw);
    glorot(gw->U, r);
    gw->b = VectorXd::Zero(3 * Hw);
  }
  {
    Rng r = next_rng();
    w.proj_W.resize(K, 2 * Hw);
    glorot(w.proj_W, r);
    w.proj_b = VectorXd::Zero(K);
  }
  w.crf_start = VectorXd::Zero(K);
  w.crf_trans = MatrixXd::Zero(K, K);
  w.crf_end = VectorXd::Zero(K);
  return m;
}

// ---------------------------------------------------------------------------
// Recurrent cells

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MatrixXd reverse_cols(const MatrixXd& m) { return m.rowwise().reverse(); }

struct LstmTrace {
  MatrixXd X;    // In x n
  MatrixXd act;  // 4H x n: i, f, o (sigmoid), g (tanh)
  MatrixXd C;    // H x (n+1), column 0 is the zero state
  MatrixXd Hs;   // H x (n+1)
  MatrixXd TC;   // H x n, tanh(c)
};

void lstm_forward(const LstmWeights& w, MatrixXd X, LstmTrace& tr) {
  const Index H = w.b.size() / 4, In = X.rows(), n = X.cols();
  tr.X = std::move(X);
  MatrixXd pre = w.W.leftCols(In) * tr.X;
  pre.colwise() += w.b;
  tr.act.resize(4 * H, n);
  tr.C = MatrixXd::Zero(H, n + 1);
  tr.Hs = MatrixXd::Zero(H, n + 1);
  tr.TC.resize(H, n);
  VectorXd a(4 * H);
  for (Index t = 0; t < n; ++t) {
    a.noalias() = pre.col(t) + w.W.rightCols(H) * tr.Hs.col(t);
    for (Index r = 0; r < 3 * H; ++r) tr.act(r, t) = sigmoid(a(r));
    for (Index r = 3 * H; r < 4 * H; ++r) tr.act(r, t) = std::tanh(a(r));
    for (Index j = 0; j < H; ++j) {
      const double c = tr.act(H + j, t) * tr.C(j, t) + tr.act(j, t) * tr.act(3 * H + j, t);
      tr.C(j, t + 1) = c;
      tr.TC(j, t) = std::tanh(c);
      tr.Hs(j, t + 1) = tr.act(2 * H + j, t) * tr.TC(j, t);
    }
  }
}

// Backpropagates a gradient on the final hidden state; returns dX.
MatrixXd lstm_backward(const LstmWeights& w, const LstmTrace& tr, const VectorXd& dh_last,
                       LstmWeights& g) {
  const Index H = w.b.size() / 4, In = tr.X.rows(), n = tr.X.cols();
  MatrixXd dA(4 * H, n);
  VectorXd dh = dh_last;
  VectorXd dc = VectorXd::Zero(H);
  for (Index t = n - 1; t >= 0; --t) {
    for (Index j = 0; j < H; ++j) {
      const double i = tr.act(j, t), f = tr.act(H + j, t), o = tr.act(2 * H + j, t),
                   gg = tr.act(3 * H + j, t), tc = tr.TC(j, t);
      const double dct = dc(j) + dh(j) * o * (1.0 - tc * tc);
      dA(j, t) = dct * gg * i * (1.0 - i);
      dA(H + j, t) = dct * tr.C(j, t) * f * (1.0 - f);
      dA(2 * H + j, t) = dh(j) * tc * o * (1.0 - o);
      dA(3 * H + j, t) = dct * i * (1.0 - gg * gg);
      dc(j) = dct * f;
    }
    dh.noalias() = w.W.rightCols(H).transpose() * dA.col(t);
  }
  g.W.leftCols(In).noalias() += dA * tr.X.transpose();
  g.W.rightCols(H).noalias() += dA * tr.Hs.leftCols(n).transpose();
  g.b += dA.rowwise().sum();
  return w.W.leftCols(In).transpose() * dA;
}

struct GruTrace {
  MatrixXd X;   // In x L
  MatrixXd Z;   // update gate, H x L
  MatrixXd R;   // reset gate
  MatrixXd HH;  // candidate
  MatrixXd RH;  // reset * h_prev
  MatrixXd Hs;  // H x (L+1), column 0 is the zero state
};

void gru_forward(const GruWeights& w, MatrixXd X, GruTrace& tr) {
  const Index H = w.U.cols(), L = X.cols();
  tr.X = std::move(X);
  MatrixXd pre = w.W * tr.X;
  pre.colwise() += w.b;
  tr.Z.resize(H, L);
  tr.R.resize(H, L);
  tr.HH.resize(H, L);
  tr.RH.resize(H, L);
  tr.Hs = MatrixXd::Zero(H, L + 1);
  VectorXd uzr(2 * H), uh(H);
  for (Index t = 0; t < L; ++t) {
    uzr.noalias() = w.U.topRows(2 * H) * tr.Hs.col(t);
    for (Index j = 0; j < H; ++j) {
      tr.Z(j, t) = sigmoid(pre(j, t) + uzr(j));
      tr.R(j, t) = sigmoid(pre(H + j, t) + uzr(H + j));
      tr.RH(j, t) = tr.R(j, t) * tr.Hs(j, t);
    }
    uh.noalias() = w.U.bottomRows(H) * tr.RH.col(t);
    for (Index j = 0; j < H; ++j) {
      tr.HH(j, t) = std::tanh(pre(2 * H + j, t) + uh(j));
      tr.Hs(j, t + 1) = (1.0 - tr.Z(j, t)) * tr.Hs(j, t) + tr.Z(j, t) * tr.HH(j, t);
    }
  }
}

// dH holds the gradient on each output state h_1..h_L; returns dX.
MatrixXd gru_backward(const GruWeights& w, const GruTrace& tr, const MatrixXd& dH, GruWeights& g) {
  const Index H = w.U.cols(), L = tr.X.cols();
  MatrixXd dA(3 * H, L);
  VectorXd dh = VectorXd::Zero(H), drh(H), next(H);
  for (Index t = L - 1; t >= 0; --t) {
    dh += dH.col(t);
    for (Index j = 0; j < H; ++j) {
      const double z = tr.Z(j, t), hh = tr.HH(j, t), hp = tr.Hs(j, t);
      dA(j, t) = dh(j) * (hh - hp) * z * (1.0 - z);
      dA(2 * H + j, t) = dh(j) * z * (1.0 - hh * hh);
    }
    drh.noalias() = w.U.bottomRows(H).transpose() * dA.col(t).tail(H);
    for (Index j = 0; j < H; ++j) {
      const double r = tr.R(j, t);
      dA(H + j, t) = drh(j) * tr.Hs(j, t) * r * (1.0 - r);
      next(j) = dh(j) * (1.0 - tr.Z(j, t)) + drh(j) * r;
    }
    next.noalias() += w.U.topRows(2 * H).transpose() * dA.col(t).head(2 * H);
    dh = next;
  }
  g.W.noalias() += dA * tr.X.transpose();
  g.U.topRows(2 * H).noalias() += dA.topRows(2 * H) * tr.Hs.leftCols(L).transpose();
  g.U.bottomRows(H).noalias() += dA.bottomRows(H) * tr.RH.transpose();
  g.b += dA.rowwise().sum();
  return w.W.transpose() * dA;
}

// ---------------------------------------------------------------------------
// Query encoder

struct CharTrace {
  std::vector<std::size_t> ids;
  LstmTrace fwd, bwd;
};

struct QueryTrace {
  std::vector<std::size_t> word_ids;
  std::vector<CharTrace> chars;
  GruTrace fwd, bwd;  // bwd runs over the reversed sequence
  MatrixXd Hcat;      // 2H x L
  Emissions E;        // L x K
};

MatrixXd char_inputs(const Model& m, const std::vector<std::size_t>& ids, bool reversed) {
  const auto n = static_cast<Index>(ids.size());
  MatrixXd X(m.weights.char_emb.rows(), n);
  for (Index t = 0; t < n; ++t) {
    const std::size_t id = ids[static_cast<std::size_t>(reversed ? n - 1 - t : t)];
    X.col(t) = m.weights.char_emb.col(static_cast<Index>(id));
  }
  return X;
}

void run_char_lstm(const Model& m, const std::string& word, CharTrace& ct) {
  ct.ids.clear();
  for (const auto& ch : utf8_chars(word)) ct.ids.push_back(m.vocab.char_id(ch));
  if (ct.ids.empty()) ct.ids.push_back(Vocab::kUnk);
  lstm_forward(m.weights.char_fwd, char_inputs(m, ct.ids, false), ct.fwd);
  lstm_forward(m.weights.char_bwd, char_inputs(m, ct.ids, true), ct.bwd);
}

void forward_query(const Tokens& tokens, const Model& m, std::vector<std::size_t> word_ids,
                   QueryTrace& tr) {
  const auto L = static_cast<Index>(tokens.size());
  const auto Dw = static_cast<Index>(m.dims.word_emb);
  const auto Hc = static_cast<Index>(m.dims.char_hidden);
  const auto Hw = static_cast<Index>(m.dims.word_hidden);
  const auto In = static_cast<Index>(m.dims.gru_input(m.use_char_embedding));

  tr.word_ids = std::move(word_ids);
  MatrixXd X(In, L);
  for (Index t = 0; t < L; ++t)
    X.col(t).head(Dw) = m.weights.word_emb.col(static_cast<Index>(tr.word_ids[static_cast<std::size_t>(t)]));
  if (m.use_char_embedding) {
    tr.chars.resize(tokens.size());
    for (Index t = 0; t < L; ++t) {
      auto& ct = tr.chars[static_cast<std::size_t>(t)];
      run_char_lstm(m, tokens[static_cast<std::size_t>(t)], ct);
      X.col(t).segment(Dw, Hc) = ct.fwd.Hs.col(ct.fwd.Hs.cols() - 1);
      X.col(t).segment(Dw + Hc, Hc) = ct.bwd.Hs.col(ct.bwd.Hs.cols() - 1);
    }
  }
  gru_forward(m.weights.word_bwd, reverse_cols(X), tr.bwd);
  gru_forward(m.weights.word_fwd, std::move(X), tr.fwd);
  tr.Hcat.resize(2 * Hw, L);
  tr.Hcat.topRows(Hw) = tr.fwd.Hs.rightCols(L);
  tr.Hcat.bottomRows(Hw) = reverse_cols(tr.bwd.Hs.rightCols(L));
  MatrixXd scores = m.weights.proj_W * tr.Hcat;
  scores.colwise() += m.weights.proj_b;
  tr.E = scores.transpose();
}

void backward_query(const Model& m, const QueryTrace& tr, const Emissions& dE, Weights& g) {
  const auto L = static_cast<Index>(tr.word_ids.size());
  const auto Dw = static_cast<Index>(m.dims.word_emb);
  const auto Hc = static_cast<Index>(m.dims.char_hidden);
  const auto Hw = static_cast<Index>(m.dims.word_hidden);

  g.proj_W.noalias() += dE.transpose() * tr.Hcat.transpose();
  g.proj_b += dE.colwise().sum().transpose();
  const MatrixXd dHcat = m.weights.proj_W.transpose() * dE.transpose();

  MatrixXd dX = gru_backward(m.weights.word_fwd, tr.fwd, dHcat.topRows(Hw), g.word_fwd);
  dX += reverse_cols(gru_backward(m.weights.word_bwd, tr.bwd, reverse_cols(dHcat.bottomRows(Hw)), g.word_bwd));

  for (Index t = 0; t < L; ++t)
    g.word_emb.col(static_cast<Index>(tr.word_ids[static_cast<std::size_t>(t)])) += dX.col(t).head(Dw);

  if (!m.use_char_embedding) return;
  for (Index t = 0; t < L; ++t) {
    const auto& ct = tr.chars[static_cast<std::size_t>(t)];
    const auto n = static_cast<Index>(ct.ids.size());
    const MatrixXd dXf = lstm_backward(m.weights.char_fwd, ct.fwd, dX.col(t).segment(Dw, Hc), g.char_fwd);
    const MatrixXd dXb = lstm_backward(m.weights.char_bwd, ct.bwd, dX.col(t).segment(Dw + Hc, Hc), g.char_bwd);
    for (Index k = 0; k < n; ++k) {
      g.char_emb.col(static_cast<Index>(ct.ids[static_cast<std::size_t>(k)])) += dXf.col(k);
      g.char_emb.col(static_cast<Index>(ct.ids[static_cast<std::size_t>(n - 1 - k)])) += dXb.col(k);
    }
  }
}

std::vector<std::size_t> lookup_words(const Tokens& tokens, const Model& m) {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(m.vocab.word_id(t));
  return ids;
}

}  // namespace

Eigen::VectorXd char_word_repr(const std::string& word, const Model& model) {
  if (word.empty()) throw ValidationError("empty word");
  if (!model.use_char_embedding) return VectorXd(0);
  CharTrace ct;
  run_char_lstm(model, word, ct);
  const auto Hc = static_cast<Index>(model.dims.char_hidden);
  VectorXd out(2 * Hc);
  out.head(Hc) = ct.fwd.Hs.col(ct.fwd.Hs.cols() - 1);
  out.tail(Hc) = ct.bwd.Hs.col(ct.bwd.Hs.cols() - 1);
  return out;
}

Emissions encode_query(const Tokens& tokens, const Model& model) {
  if (tokens.empty()) throw ValidationError("empty query");
  QueryTrace tr;
  forward_query(tokens, model, lookup_words(tokens, model), tr);
  return std::move(tr.E);
}

Labels decode_labels(const Model& model, const Tokens& tokens) {
  const Emissions e = encode_query(tokens, model);
  if (model.use_crf) return viterbi_decode(e, model.transitions()).labels;
  Labels labels(tokens.size());
  for (Index i = 0; i < e.rows(); ++i) {
    Index best = 0;
    e.row(i).maxCoeff(&best);
    labels[static_cast<std::size_t>(i)] = label_at(static_cast<std::size_t>(best));
  }
  return repair_bio(std::move(labels));
}

double accumulate_query_grads(const TaggedQuery& q, const Model& model, double scale,
                              const TrainOptions& options, std::size_t position, Weights& grads) {
  if (q.tokens.empty() || q.tokens.size() != q.labels.size())
    throw ValidationError("training query has mismatched or empty tokens/labels");
  auto ids = lookup_words(q.tokens, model);
  if (options.word_dropout > 0.0) {
    Rng rng = Rng::derive(options.seed, position);
    for (auto& id : ids)
      if (rng.bernoulli(options.word_dropout)) id = Vocab::kUnk;
  }
  QueryTrace tr;
  forward_query(q.tokens, model, std::move(ids), tr);

  double loss = 0.0;
  Emissions dE;
  if (model.use_crf) {
    CrfGradient cg = crf_nll_grad(tr.E, model.transitions(), q.labels);
    loss = scale * cg.loss;
    dE = scale * cg.d_emissions;
    grads.crf_start += scale * cg.d_start;
    grads.crf_trans += scale * cg.d_trans;
    grads.crf_end += scale * cg.d_end;
  } else {
    dE.resize(tr.E.rows(), tr.E.cols());
    for (Index i = 0; i < tr.E.rows(); ++i) {
      const double m = tr.E.row(i).maxCoeff();
      const Eigen::RowVectorXd ex = (tr.E.row(i).array() - m).exp().matrix();
      const double sum = ex.sum();
      const auto gold = static_cast<Index>(index_of(q.labels[static_cast<std::size_t>(i)]));
      loss += scale * (m + std::log(sum) - tr.E(i, gold));
      dE.row(i) = scale * ex / sum;
      dE(i, gold) -= scale;
    }
  }
  backward_query(model, tr, dE, grads);
  return loss;
}

namespace {

double batch_scale(const std::vector<const TaggedQuery*>& batch, const Model& model) {
  if (model.use_crf) return 1.0 / static_cast<double>(batch.size());
  std::size_t tokens = 0;
  for (const auto* q : batch) tokens += q->tokens.size();
  return 1.0 / static_cast<double>(tokens);
}

}  // namespace

LossGrads model_loss_grads(const std::vector<const TaggedQuery*>& batch, const Model& model,
                           const TrainOptions& options) {
  if (batch.empty()) throw ValidationError("empty training batch");
  const double scale = batch_scale(batch, model);
  const std::size_t shards = std::min(kGradShards, batch.size());
  LossGrads total{0.0, model.weights.zeros_like()};
  for (std::size_t s = 0; s < shards; ++s) {
    const std::size_t lo = s * batch.size() / shards, hi = (s + 1) * batch.size() / shards;
    Weights g = model.weights.zeros_like();
    double loss = 0.0;
    for (std::size_t i = lo; i < hi; ++i)
      loss += accumulate_query_grads(*batch[i], model, scale, options, i, g);
    total.loss += loss;
    total.grads.add(g);
  }
  return total;
}

LossGrads model_loss_grads(const std::vector<TaggedQuery>& batch, const Model& model,
                           const TrainOptions& options) {
  std::vector<const TaggedQuery*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& q : batch) ptrs.push_back(&q);
  return model_loss_grads(ptrs, model, options);
}

void sgd_step(Weights& weights, const Weights& grads, double lr, double clip) {
  if (!(lr > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(clip > 0.0)) throw ValidationError("clip must be positive");
  double sq = 0.0;
  std::vector<const double*> g;
  std::vector<Index> sizes;
  grads.for_each_block([&](std::string_view name, const auto& t) {
    if (!t.allFinite()) throw ValidationError("non-finite gradient in block " + std::string(name));
    sq += t.squaredNorm();
    g.push_back(t.data());
    sizes.push_back(t.size());
  });
  const double norm = std::sqrt(sq);
  const double factor = norm > clip ? lr * clip / norm : lr;
  std::size_t k = 0;
  weights.for_each_block([&](std::string_view name, auto& t) {
    if (t.size() != sizes[k]) throw ValidationError("gradient shape mismatch in block " + std::string(name));
    double* d = t.data();
    const double* s = g[k++];
    for (Index i = 0; i < t.size(); ++i) d[i] -= factor * s[i];
  });
}

}  // namespace qtag
