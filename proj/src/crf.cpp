#include "qtag/crf.hpp"

#include <cmath>
#include <limits>

namespace qtag {

namespace {

constexpr std::size_t K = kNumLabels;

double log_sum_exp(const double* xs, std::size_t n) {
  double m = xs[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, xs[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(xs[i] - m);
  return m + std::log(s);
}

void require_shape(const Emissions& e) {
  if (e.rows() < 1) throw ValidationError("emission matrix has no rows");
  if (e.cols() != static_cast<Eigen::Index>(K))
    throw ValidationError("emission matrix must have " + std::to_string(K) + " columns");
}

// alpha(i,k): log-sum over prefixes ending at (i,k), including e(i,k).
Eigen::MatrixXd forward(const Emissions& e, const TransitionMatrix& t) {
  const Eigen::Index L = e.rows();
  Eigen::MatrixXd alpha(L, K);
  for (std::size_t k = 0; k < K; ++k) alpha(0, k) = t.start_score(k) + e(0, k);
  double buf[K];
  for (Eigen::Index i = 1; i < L; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = 0; j < K; ++j) buf[j] = alpha(i - 1, j) + t.trans_score(j, k);
      alpha(i, k) = log_sum_exp(buf, K) + e(i, k);
    }
  }
  return alpha;
}

// beta(i,k): log-sum over suffixes after (i,k), including the end score.
Eigen::MatrixXd backward(const Emissions& e, const TransitionMatrix& t) {
  const Eigen::Index L = e.rows();
  Eigen::MatrixXd beta(L, K);
  for (std::size_t k = 0; k < K; ++k) beta(L - 1, k) = t.end_score(k);
  double buf[K];
  for (Eigen::Index i = L - 2; i >= 0; --i) {
    for (std::size_t j = 0; j < K; ++j) {
      for (std::size_t k = 0; k < K; ++k) buf[k] = t.trans_score(j, k) + e(i + 1, k) + beta(i + 1, k);
      beta(i, j) = log_sum_exp(buf, K);
    }
  }
  return beta;
}

double finish(const Eigen::MatrixXd& alpha, const TransitionMatrix& t) {
  double buf[K];
  const Eigen::Index last = alpha.rows() - 1;
  for (std::size_t k = 0; k < K; ++k) buf[k] = alpha(last, k) + t.end_score(k);
  return log_sum_exp(buf, K);
}

}  // namespace

TransitionMask TransitionMask::allow_all() {
  TransitionMask m;
  m.start.fill(true);
  m.end.fill(true);
  for (auto& row : m.trans) row.fill(true);
  return m;
}

TransitionMask build_bio_mask() {
  TransitionMask m = TransitionMask::allow_all();
  for (Label to : kAllLabels) {
    if (!is_inside(to)) continue;
    m.start[index_of(to)] = false;
    for (Label from : kAllLabels) {
      if (from == Label::O || type_of(from) != type_of(to)) m.trans[index_of(from)][index_of(to)] = false;
    }
  }
  return m;
}

bool crosses_mask(const TransitionMask& mask, const Labels& labels) {
  if (labels.empty()) return false;
  if (!mask.start[index_of(labels.front())] || !mask.end[index_of(labels.back())]) return true;
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (!mask.trans[index_of(labels[i - 1])][index_of(labels[i])]) return true;
  return false;
}

double sequence_score(const Emissions& e, const TransitionMatrix& t, const Labels& labels) {
  require_shape(e);
  if (labels.size() != static_cast<std::size_t>(e.rows()))
    throw ValidationError("label sequence length does not match emissions");
  if (crosses_mask(t.mask, labels)) return -std::numeric_limits<double>::infinity();
  double s = t.start[index_of(labels.front())] + t.end[index_of(labels.back())];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    s += e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(index_of(labels[i])));
    if (i > 0) s += t.trans(index_of(labels[i - 1]), index_of(labels[i]));
  }
  return s;
}

double log_partition(const Emissions& e, const TransitionMatrix& t) {
  require_shape(e);
  return finish(forward(e, t), t);
}

Eigen::MatrixXd label_marginals(const Emissions& e, const TransitionMatrix& t) {
  require_shape(e);
  const Eigen::MatrixXd alpha = forward(e, t);
  const Eigen::MatrixXd beta = backward(e, t);
  const double log_z = finish(alpha, t);
  return (alpha + beta).array().unaryExpr([log_z](double v) { return std::exp(v - log_z); });
}

CrfGradient crf_nll_grad(const Emissions& e, const TransitionMatrix& t, const Labels& gold) {
  require_shape(e);
  const Eigen::Index L = e.rows();
  if (gold.size() != static_cast<std::size_t>(L))
    throw ValidationError("gold label length does not match emissions");
  if (crosses_mask(t.mask, gold))
    throw ValidationError("gold label sequence violates the transition mask");

  const Eigen::MatrixXd alpha = forward(e, t);
  const Eigen::MatrixXd beta = backward(e, t);
  const double log_z = finish(alpha, t);

  CrfGradient g;
  g.loss = log_z - sequence_score(e, t, gold);
  g.d_emissions = (alpha + beta).array().unaryExpr([log_z](double v) { return std::exp(v - log_z); });
  g.d_start = Eigen::VectorXd::Zero(K);
  g.d_end = Eigen::VectorXd::Zero(K);
  g.d_trans = Eigen::MatrixXd::Zero(K, K);

  for (std::size_t k = 0; k < K; ++k) {
    if (t.mask.start[k]) g.d_start[k] = g.d_emissions(0, k);
    if (t.mask.end[k]) g.d_end[k] = g.d_emissions(L - 1, k);
  }
  for (Eigen::Index i = 0; i + 1 < L; ++i) {
    for (std::size_t j = 0; j < K; ++j) {
      for (std::size_t k = 0; k < K; ++k) {
        if (!t.mask.trans[j][k]) continue;
        g.d_trans(j, k) += std::exp(alpha(i, j) + t.trans(j, k) + e(i + 1, k) + beta(i + 1, k) - log_z);
      }
    }
  }

  for (Eigen::Index i = 0; i < L; ++i) g.d_emissions(i, index_of(gold[i])) -= 1.0;
  g.d_start[index_of(gold.front())] -= 1.0;
  g.d_end[index_of(gold.back())] -= 1.0;
  for (Eigen::Index i = 0; i + 1 < L; ++i) g.d_trans(index_of(gold[i]), index_of(gold[i + 1])) -= 1.0;
  return g;
}

Decoded viterbi_decode(const Emissions& e, const TransitionMatrix& t) {
  require_shape(e);
  const Eigen::Index L = e.rows();
  Eigen::MatrixXd delta(L, K);
  Eigen::Matrix<std::size_t, Eigen::Dynamic, Eigen::Dynamic> back(L, K);
  for (std::size_t k = 0; k < K; ++k) delta(0, k) = t.start_score(k) + e(0, k);
  for (Eigen::Index i = 1; i < L; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      std::size_t best = 0;
      double best_score = delta(i - 1, 0) + t.trans_score(0, k);
      for (std::size_t j = 1; j < K; ++j) {
        const double s = delta(i - 1, j) + t.trans_score(j, k);
        if (s > best_score) {
          best_score = s;
          best = j;
        }
      }
      delta(i, k) = best_score + e(i, k);
      back(i, k) = best;
    }
  }
  std::size_t last = 0;
  double best_score = delta(L - 1, 0) + t.end_score(0);
  for (std::size_t k = 1; k < K; ++k) {
    const double s = delta(L - 1, k) + t.end_score(k);
    if (s > best_score) {
      best_score = s;
      last = k;
    }
  }
  Decoded out;
  out.score = best_score;
  out.labels.resize(static_cast<std::size_t>(L));
  std::size_t cur = last;
  for (Eigen::Index i = L - 1; i >= 0; --i) {
    out.labels[static_cast<std::size_t>(i)] = label_at(cur);
    if (i > 0) cur = back(i, cur);
  }
  return out;
}

}  // namespace qtag
