#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qtag/core.hpp"
#include "qtag/net.hpp"

namespace qtag {

struct TrainConfig {
  std::size_t max_epochs = 50;
  // Training stops once this many consecutive epochs fail to improve dev F1
  // (at least one).
  std::size_t patience = 3;
  std::size_t batch_size = 32;
  double lr = 0.05;
  double clip = 5.0;
  std::uint64_t shuffle_seed = 1;
  double word_dropout = 0.0;
  bool parallel = true;  // OpenMP kernels; results match the serial path

  void validate() const;
};

// Counts and scores on a 0-100 scale; a vanishing denominator scores 0.
struct PrfScores {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;

  static PrfScores from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
  friend bool operator==(const PrfScores&, const PrfScores&) = default;
};

struct EvalReport {
  PrfScores micro;
  PrfScores brd;
  PrfScores prd;

  double f1() const { return micro.f1; }
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Exact-match entity F1: a predicted (type, start, end) is a true positive
// only if it equals a gold entity. Micro-averaged over all queries.
EvalReport evaluate_f1(const std::vector<Labels>& predictions, const std::vector<Labels>& gold);
EvalReport evaluate_f1(const std::vector<TaggedQuery>& predictions,
                       const std::vector<TaggedQuery>& gold);

// Human-readable table and a single-line JSON record.
std::string format_report_table(const EvalReport& r);
std::string format_report_record(const EvalReport& r);

TaggedQuery predict(const Model& model, const Tokens& tokens);
std::vector<Labels> predict_all(const Model& model, const std::vector<Tokens>& queries,
                                bool parallel = true);
EvalReport evaluate_model(const Model& model, const Dataset& data, bool parallel = true);

struct TrainResult {
  Model best;
  std::size_t best_epoch = 0;            // 1-based
  std::vector<EvalReport> history;       // dev report per epoch
  std::vector<double> train_loss;        // mean batch loss per epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double loss, const EvalReport& dev)>;

// Seeded shuffle, mini-batch SGD, dev evaluation each epoch; returns the
// snapshot with the best dev F1 (earliest on ties).
TrainResult train_model(const Dataset& train, const Dataset& dev, Model params0,
                        const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace qtag
