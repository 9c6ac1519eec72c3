#pragma once

#include <array>

#include <Eigen/Core>

#include "qtag/core.hpp"

namespace qtag {

// Per-token label scores, L rows by kNumLabels columns.
using Emissions = Eigen::MatrixXd;

// Additive score of a forbidden move. Finite so arithmetic never produces NaN.
inline constexpr double kMaskPenalty = -1e30;

// Allowed moves; `trans[from][to]`.
struct TransitionMask {
  std::array<bool, kNumLabels> start{};
  std::array<std::array<bool, kNumLabels>, kNumLabels> trans{};
  std::array<bool, kNumLabels> end{};

  static TransitionMask allow_all();
  friend bool operator==(const TransitionMask&, const TransitionMask&) = default;
};

// Forbids start->I-X, O->I-X, B-X->I-Y and I-X->I-Y (X != Y). Every label may
// end a query.
TransitionMask build_bio_mask();

struct TransitionMatrix {
  Eigen::VectorXd start = Eigen::VectorXd::Zero(kNumLabels);
  Eigen::MatrixXd trans = Eigen::MatrixXd::Zero(kNumLabels, kNumLabels);  // from x to
  Eigen::VectorXd end = Eigen::VectorXd::Zero(kNumLabels);
  TransitionMask mask = TransitionMask::allow_all();

  static TransitionMatrix zeros(const TransitionMask& mask) {
    TransitionMatrix t;
    t.mask = mask;
    return t;
  }

  // Scores with the mask folded in as kMaskPenalty.
  double start_score(std::size_t k) const { return mask.start[k] ? start[k] : kMaskPenalty; }
  double trans_score(std::size_t from, std::size_t to) const {
    return mask.trans[from][to] ? trans(from, to) : kMaskPenalty;
  }
  double end_score(std::size_t k) const { return mask.end[k] ? end[k] : kMaskPenalty; }
};

bool crosses_mask(const TransitionMask& mask, const Labels& labels);

// start[y0] + sum e[i,yi] + sum trans[yi,yi+1] + end[yL-1]; -infinity when the
// sequence crosses the mask.
double sequence_score(const Emissions& e, const TransitionMatrix& t, const Labels& labels);

// Log-sum-exp over all mask-valid label sequences (forward algorithm).
double log_partition(const Emissions& e, const TransitionMatrix& t);

struct CrfGradient {
  double loss = 0.0;
  Emissions d_emissions;
  Eigen::VectorXd d_start;
  Eigen::MatrixXd d_trans;
  Eigen::VectorXd d_end;
};

// Negative log-likelihood of `gold` and its gradient (marginals minus gold
// indicators). Masked entries receive zero gradient.
CrfGradient crf_nll_grad(const Emissions& e, const TransitionMatrix& t, const Labels& gold);

// Per-position label marginals, L x K.
Eigen::MatrixXd label_marginals(const Emissions& e, const TransitionMatrix& t);

struct Decoded {
  Labels labels;
  double score = 0.0;
};

// Max-scoring mask-valid sequence; ties resolve to the lower label index.
Decoded viterbi_decode(const Emissions& e, const TransitionMatrix& t);

}  // namespace qtag
