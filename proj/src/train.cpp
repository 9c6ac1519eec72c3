#include "qtag/train.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "qtag/parallel.hpp"
#include "qtag/rng.hpp"

namespace qtag {

void TrainConfig::validate() const {
  if (max_epochs < 1) throw ValidationError("max_epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(lr > 0.0)) throw ValidationError("lr must be positive");
  if (!(clip > 0.0)) throw ValidationError("clip must be positive");
  if (word_dropout < 0.0 || word_dropout >= 1.0) throw ValidationError("word_dropout must be in [0,1)");
}

PrfScores PrfScores::from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  PrfScores s;
  s.tp = tp;
  s.fp = fp;
  s.fn = fn;
  s.precision = tp + fp ? 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = tp + fn ? 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

EvalReport evaluate_f1(const std::vector<Labels>& predictions, const std::vector<Labels>& gold) {
  if (predictions.size() != gold.size())
    throw ValidationError("evaluation inputs are misaligned: " + std::to_string(predictions.size()) +
                          " predictions vs " + std::to_string(gold.size()) + " gold queries");
  // [type][tp, fp, fn]
  std::size_t counts[2][3] = {};
  for (std::size_t q = 0; q < gold.size(); ++q) {
    if (predictions[q].size() != gold[q].size())
      throw ValidationError("query " + std::to_string(q) + ": prediction length differs from gold");
    const auto p = bio_decode(predictions[q]);
    const auto g = bio_decode(gold[q]);
    for (const auto& span : p) {
      const bool hit = std::find(g.begin(), g.end(), span) != g.end();
      ++counts[static_cast<int>(span.type)][hit ? 0 : 1];
    }
    for (const auto& span : g)
      if (std::find(p.begin(), p.end(), span) == p.end()) ++counts[static_cast<int>(span.type)][2];
  }
  EvalReport r;
  r.brd = PrfScores::from_counts(counts[0][0], counts[0][1], counts[0][2]);
  r.prd = PrfScores::from_counts(counts[1][0], counts[1][1], counts[1][2]);
  r.micro = PrfScores::from_counts(counts[0][0] + counts[1][0], counts[0][1] + counts[1][1],
                                   counts[0][2] + counts[1][2]);
  return r;
}

EvalReport evaluate_f1(const std::vector<TaggedQuery>& predictions,
                       const std::vector<TaggedQuery>& gold) {
  if (predictions.size() != gold.size())
    throw ValidationError("evaluation inputs are misaligned: " + std::to_string(predictions.size()) +
                          " predictions vs " + std::to_string(gold.size()) + " gold queries");
  std::vector<Labels> p, g;
  p.reserve(predictions.size());
  g.reserve(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predictions[i].tokens.size() != gold[i].tokens.size())
      throw ValidationError("query " + std::to_string(i) + ": token counts differ");
    p.push_back(predictions[i].labels);
    g.push_back(gold[i].labels);
  }
  return evaluate_f1(p, g);
}

std::string format_report_table(const EvalReport& r) {
  std::string out = "type       P       R      F1     TP     FP     FN\n";
  char line[128];
  auto row = [&](const char* name, const PrfScores& s) {
    std::snprintf(line, sizeof line, "%-5s %7.2f %7.2f %7.2f %6zu %6zu %6zu\n", name, s.precision,
                  s.recall, s.f1, s.tp, s.fp, s.fn);
    out += line;
  };
  row("BRD", r.brd);
  row("PRD", r.prd);
  row("micro", r.micro);
  return out;
}

std::string format_report_record(const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "{\"precision\":%.4f,\"recall\":%.4f,\"f1\":%.4f,\"tp\":%zu,\"fp\":%zu,\"fn\":%zu,"
                "\"brd_f1\":%.4f,\"prd_f1\":%.4f}",
                r.micro.precision, r.micro.recall, r.micro.f1, r.micro.tp, r.micro.fp, r.micro.fn,
                r.brd.f1, r.prd.f1);
  return buf;
}

TaggedQuery predict(const Model& model, const Tokens& tokens) {
  if (tokens.empty()) throw ValidationError("empty query");
  return TaggedQuery{tokens, decode_labels(model, tokens), Source::Predicted};
}

std::vector<Labels> predict_all(const Model& model, const std::vector<Tokens>& queries,
                                bool parallel) {
  return parallel ? predict_batch_parallel(model, queries) : predict_batch(model, queries);
}

EvalReport evaluate_model(const Model& model, const Dataset& data, bool parallel) {
  std::vector<Tokens> tokens;
  std::vector<Labels> gold;
  tokens.reserve(data.size());
  gold.reserve(data.size());
  for (const auto& q : data.items) {
    tokens.push_back(q.tokens);
    gold.push_back(q.labels);
  }
  return evaluate_f1(predict_all(model, tokens, parallel), gold);
}

TrainResult train_model(const Dataset& train, const Dataset& dev, Model params0,
                        const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty()) throw ValidationError("training set is empty");
  if (dev.empty()) throw ValidationError("dev set is empty");
  if (params0.use_crf) {
    for (std::size_t i = 0; i < train.size(); ++i)
      if (crosses_mask(params0.mask, train.items[i].labels))
        throw ValidationError("training query " + std::to_string(i) + " violates the transition mask");
  }

  TrainResult result;
  Model current = std::move(params0);
  result.best = current;
  double best_f1 = -1.0;
  std::size_t stale = 0;
  const std::size_t stop_after = std::max<std::size_t>(1, cfg.patience);

  std::vector<std::size_t> order(train.size());
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::derive(cfg.shuffle_seed, epoch);
    rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::vector<const TaggedQuery*> batch;
    for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
      batch.clear();
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(&train.items[order[i]]);
      TrainOptions opts{cfg.word_dropout, Rng::derive(cfg.shuffle_seed ^ 0xd1b54a32d192ed03ULL,
                                                      epoch * 1'000'003ULL + batches).next()};
      LossGrads lg = cfg.parallel ? model_loss_grads_parallel(batch, current, opts)
                                  : model_loss_grads(batch, current, opts);
      sgd_step(current.weights, lg.grads, cfg.lr, cfg.clip);
      loss_sum += lg.loss;
      ++batches;
    }
    const double mean_loss = loss_sum / static_cast<double>(batches);
    const EvalReport report = evaluate_model(current, dev, cfg.parallel);
    result.history.push_back(report);
    result.train_loss.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch, mean_loss, report);

    if (report.f1() > best_f1) {
      best_f1 = report.f1();
      result.best = current;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= stop_after) {
      break;
    }
  }
  return result;
}

}  // namespace qtag
