#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "qtag/core.hpp"
#include "qtag/crf.hpp"
#include "qtag/net.hpp"
#include "qtag/rng.hpp"

namespace qtag::testing {

// "B-BRD B-PRD O" -> labels
inline Labels labels(const std::string& s) {
  std::istringstream in(s);
  Labels out;
  std::string tok;
  while (in >> tok) out.push_back(parse_label(tok));
  return out;
}

inline Tokens tokens(const std::string& s) {
  std::istringstream in(s);
  Tokens out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline TaggedQuery query(const std::string& toks, const std::string& labs, Source src = Source::Golden) {
  return TaggedQuery{tokens(toks), labels(labs), src};
}

// Uniformly random valid BIO sequence of length n.
inline Labels random_bio(Rng& rng, std::size_t n) {
  Labels out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Label> options = {Label::O, Label::BBrd, Label::BPrd};
    if (i > 0 && out.back() != Label::O) options.push_back(inside_of(type_of(out.back())));
    out.push_back(options[rng.index(options.size())]);
  }
  return out;
}

inline Emissions random_emissions(Rng& rng, std::size_t L, double scale = 2.0) {
  Emissions e(static_cast<Eigen::Index>(L), kNumLabels);
  for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = rng.uniform(-scale, scale);
  return e;
}

inline TransitionMatrix random_transitions(Rng& rng, const TransitionMask& mask, double scale = 1.0) {
  TransitionMatrix t = TransitionMatrix::zeros(mask);
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    t.start[k] = rng.uniform(-scale, scale);
    t.end[k] = rng.uniform(-scale, scale);
    for (std::size_t j = 0; j < kNumLabels; ++j) t.trans(k, j) = rng.uniform(-scale, scale);
  }
  return t;
}

// Every label sequence of length L, mask-valid or not.
inline std::vector<Labels> all_paths(std::size_t L) {
  std::vector<Labels> out;
  std::size_t total = 1;
  for (std::size_t i = 0; i < L; ++i) total *= kNumLabels;
  for (std::size_t code = 0; code < total; ++code) {
    Labels y(L);
    std::size_t c = code;
    for (std::size_t i = 0; i < L; ++i, c /= kNumLabels) y[i] = label_at(c % kNumLabels);
    out.push_back(std::move(y));
  }
  return out;
}

// Direct term-by-term score; -inf when a masked move is used.
inline double hand_score(const Emissions& e, const TransitionMatrix& t, const Labels& y) {
  if (crosses_mask(t.mask, y)) return -std::numeric_limits<double>::infinity();
  double s = t.start[index_of(y[0])] + t.end[index_of(y.back())];
  for (std::size_t i = 0; i < y.size(); ++i) s += e(static_cast<Eigen::Index>(i), index_of(y[i]));
  for (std::size_t i = 0; i + 1 < y.size(); ++i) s += t.trans(index_of(y[i]), index_of(y[i + 1]));
  return s;
}

struct BruteForce {
  double log_z;
  double best_score;
  Labels best;
};

inline BruteForce brute_force(const Emissions& e, const TransitionMatrix& t) {
  std::vector<double> scores;
  BruteForce out{0.0, -std::numeric_limits<double>::infinity(), {}};
  for (const auto& y : all_paths(static_cast<std::size_t>(e.rows()))) {
    const double s = hand_score(e, t, y);
    if (!std::isfinite(s)) continue;
    scores.push_back(s);
    if (s > out.best_score) {
      out.best_score = s;
      out.best = y;
    }
  }
  const double m = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - m);
  out.log_z = m + std::log(sum);
  return out;
}

inline double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1e-6, std::abs(analytic), std::abs(numeric)});
}

}  // namespace qtag::testing
