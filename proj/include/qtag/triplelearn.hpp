#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qtag/core.hpp"
#include "qtag/datagen.hpp"
#include "qtag/net.hpp"
#include "qtag/train.hpp"

namespace qtag {

// Trains and applies models for the iterative loop. The neural learner is
// the production implementation; tests inject scripted ones.
class Learner {
 public:
  virtual ~Learner() = default;

  // `previous` is the prior iteration's model when warm starting.
  virtual Model fit(const Dataset& train, const Dataset& dev, std::size_t iteration,
                    const Model* previous) = 0;
  virtual std::vector<Labels> predict(const Model& model, const std::vector<Tokens>& queries) = 0;
  virtual EvalReport evaluate(const Model& model, const Dataset& data);
};

class NeuralLearner : public Learner {
 public:
  NeuralLearner(ModelDims dims, ModelFlags flags, TrainConfig train, std::uint64_t init_seed,
                const EmbeddingTable* pretrained = nullptr);

  Model fit(const Dataset& train, const Dataset& dev, std::size_t iteration,
            const Model* previous) override;
  std::vector<Labels> predict(const Model& model, const std::vector<Tokens>& queries) override;

  void set_epoch_callback(EpochCallback cb) { on_epoch_ = std::move(cb); }

 private:
  ModelDims dims_;
  ModelFlags flags_;
  TrainConfig train_;
  std::uint64_t init_seed_;
  const EmbeddingTable* pretrained_;
  EpochCallback on_epoch_;
};

// Copies every tensor of `from` whose shape matches into `into`; embedding
// columns are matched by word/character.
void warm_start_from(const Model& from, Model& into);

enum class SelectionMetric { TestF1, DevF1 };

struct TripleLearnConfig {
  double growth_factor = 2.0;
  double synthetic_fraction = 0.1;
  std::size_t max_iterations = 9;
  std::uint64_t seed = 42;  // sampling and balancing streams
  bool warm_start = false;
  SelectionMetric select_on = SelectionMetric::TestF1;

  void validate() const;
};

struct IterationReport {
  std::size_t iteration = 0;
  std::size_t training_size = 0;
  std::size_t unique_brd = 0;
  std::size_t unique_prd = 0;
  double dev_f1 = 0.0;
  double test_f1 = 0.0;
  std::size_t noisy_sampled = 0;
  std::size_t noisy_accepted = 0;
  std::size_t synthetic_added = 0;

  friend bool operator==(const IterationReport&, const IterationReport&) = default;
};

// Audit trail of one item appended to the training set.
struct Addition {
  std::size_t iteration;
  Source role;
  std::size_t pool_index;  // index into the noisy or synthetic input
};

struct TripleLearnResult {
  Model best;
  std::size_t best_iteration = 0;
  std::vector<IterationReport> reports;
  std::vector<Addition> additions;
  Dataset final_training;
  std::string stop_reason;
};

// Keeps, in order, the candidates whose predicted labels equal their noisy
// labels token for token.
Dataset consensus_filter(const Model& model, const Dataset& candidates);
std::vector<std::size_t> consensus_indices(Learner& learner, const Model& model,
                                           const Dataset& candidates);

// Distinct catalog brands / product types labeled as such in `training`.
std::pair<std::size_t, std::size_t> coverage(const Dataset& training, const Catalog& catalog);

using IterationCallback = std::function<void(const IterationReport&)>;

TripleLearnResult run_triplelearn(const GoldenSplit& golden, const Dataset& noisy,
                                  const Dataset& synthetic, const AmbiguousLexicon& lexicon,
                                  const Catalog& catalog, const TripleLearnConfig& cfg,
                                  Learner& learner, const IterationCallback& on_iteration = {});

struct BaselineResult {
  Model model;
  EvalReport test;
  EvalReport dev;
  std::size_t training_size = 0;
};

// Single training run on golden train + all noisy + all synthetic, balanced
// like the first iteration, evaluated on the golden test split.
BaselineResult one_pass_baseline(const GoldenSplit& golden, const Dataset& noisy,
                                 const Dataset& synthetic, const AmbiguousLexicon& lexicon,
                                 const TripleLearnConfig& cfg, Learner& learner);

// Table of reports shaped like the usual per-iteration summary.
std::string format_iteration_table(const std::vector<IterationReport>& reports);
std::string format_iteration_record(const IterationReport& r);

}  // namespace qtag
