#include "qtag/triplelearn.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <tuple>
#include <type_traits>

#include "qtag/parallel.hpp"
#include "qtag/rng.hpp"

namespace qtag {

EvalReport Learner::evaluate(const Model& model, const Dataset& data) {
  std::vector<Tokens> tokens;
  std::vector<Labels> gold;
  for (const auto& q : data.items) {
    tokens.push_back(q.tokens);
    gold.push_back(q.labels);
  }
  return evaluate_f1(predict(model, tokens), gold);
}

NeuralLearner::NeuralLearner(ModelDims dims, ModelFlags flags, TrainConfig train,
                             std::uint64_t init_seed, const EmbeddingTable* pretrained)
    : dims_(dims), flags_(flags), train_(train), init_seed_(init_seed), pretrained_(pretrained) {}

Model NeuralLearner::fit(const Dataset& train, const Dataset& dev, std::size_t,
                         const Model* previous) {
  Model m = init_params(dims_, Vocab::build({&train}), pretrained_, init_seed_, flags_);
  if (previous) warm_start_from(*previous, m);
  return train_model(train, dev, std::move(m), train_, on_epoch_).best;
}

std::vector<Labels> NeuralLearner::predict(const Model& model, const std::vector<Tokens>& queries) {
  return predict_all(model, queries, train_.parallel);
}

void warm_start_from(const Model& from, Model& into) {
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> mats;
  std::vector<std::pair<std::string, const Eigen::VectorXd*>> vecs;
  from.weights.for_each_block([&](std::string_view name, const auto& t) {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Eigen::MatrixXd>)
      mats.emplace_back(std::string(name), &t);
    else
      vecs.emplace_back(std::string(name), &t);
  });
  into.weights.for_each_block([&](std::string_view name, auto& t) {
    if (name == "word_emb" || name == "char_emb") return;
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Eigen::MatrixXd>) {
      for (const auto& [n, src] : mats)
        if (n == name && src->rows() == t.rows() && src->cols() == t.cols()) t = *src;
    } else {
      for (const auto& [n, src] : vecs)
        if (n == name && src->size() == t.size()) t = *src;
    }
  });
  auto copy_columns = [](const std::vector<std::string>& from_keys, const Eigen::MatrixXd& src,
                         auto id_of, Eigen::MatrixXd& dst) {
    if (src.rows() != dst.rows()) return;
    for (std::size_t i = 0; i < from_keys.size(); ++i) {
      const std::size_t j = id_of(from_keys[i]);
      if (j != Vocab::kUnk || i == Vocab::kUnk)
        dst.col(static_cast<Eigen::Index>(j)) = src.col(static_cast<Eigen::Index>(i));
    }
  };
  copy_columns(from.vocab.words(), from.weights.word_emb,
               [&](const std::string& w) { return into.vocab.word_id(w); }, into.weights.word_emb);
  if (from.use_char_embedding && into.use_char_embedding)
    copy_columns(from.vocab.chars(), from.weights.char_emb,
                 [&](const std::string& c) { return into.vocab.char_id(c); }, into.weights.char_emb);
}

void TripleLearnConfig::validate() const {
  if (!(growth_factor > 1.0)) throw ValidationError("growth_factor must be > 1");
  if (synthetic_fraction < 0.0 || synthetic_fraction > 1.0)
    throw ValidationError("synthetic_fraction must be in [0,1]");
  if (max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
}

std::vector<std::size_t> consensus_indices(Learner& learner, const Model& model,
                                           const Dataset& candidates) {
  std::vector<Tokens> tokens;
  tokens.reserve(candidates.size());
  for (const auto& q : candidates.items) tokens.push_back(q.tokens);
  const auto predicted = learner.predict(model, tokens);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (predicted[i] == candidates.items[i].labels) keep.push_back(i);
  return keep;
}

Dataset consensus_filter(const Model& model, const Dataset& candidates) {
  std::vector<Tokens> tokens;
  tokens.reserve(candidates.size());
  for (const auto& q : candidates.items) tokens.push_back(q.tokens);
  const auto predicted = predict_batch_parallel(model, tokens);
  Dataset out;
  out.role = candidates.role;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (predicted[i] == candidates.items[i].labels) out.items.push_back(candidates.items[i]);
  return out;
}

std::pair<std::size_t, std::size_t> coverage(const Dataset& training, const Catalog& catalog) {
  std::set<std::string> brd, prd;
  for (const auto& q : training.items) {
    for (const auto& span : bio_decode(q.labels)) {
      std::string s = surface(q.tokens, span);
      if (span.type == EntityType::Brd && catalog.brands.contains(s)) brd.insert(std::move(s));
      else if (span.type == EntityType::Prd && catalog.product_types.contains(s)) prd.insert(std::move(s));
    }
  }
  return {brd.size(), prd.size()};
}

namespace {

Dataset subset(const Dataset& data, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.role = data.role;
  out.items.reserve(idx.size());
  for (auto i : idx) out.items.push_back(data.items[i]);
  return out;
}

double selection_score(const IterationReport& r, SelectionMetric m) {
  return m == SelectionMetric::TestF1 ? r.test_f1 : r.dev_f1;
}

}  // namespace

TripleLearnResult run_triplelearn(const GoldenSplit& golden, const Dataset& noisy,
                                  const Dataset& synthetic, const AmbiguousLexicon& lexicon,
                                  const Catalog& catalog, const TripleLearnConfig& cfg,
                                  Learner& learner, const IterationCallback& on_iteration) {
  cfg.validate();
  if (golden.train.empty() || golden.dev.empty() || golden.test.empty())
    throw ValidationError("golden split has an empty train, dev, or test part");

  TripleLearnResult result;
  Dataset training = balance_ambiguous(golden.train, lexicon, Rng::derive(cfg.seed, 0).next());
  training.role = Source::Golden;

  std::vector<std::size_t> noisy_pool(noisy.size()), synthetic_pool(synthetic.size());
  std::iota(noisy_pool.begin(), noisy_pool.end(), 0);
  std::iota(synthetic_pool.begin(), synthetic_pool.end(), 0);

  auto record = [&](std::size_t iteration, const Model& model, IterationReport r) {
    r.iteration = iteration;
    r.training_size = training.size();
    std::tie(r.unique_brd, r.unique_prd) = coverage(training, catalog);
    r.dev_f1 = learner.evaluate(model, golden.dev).f1();
    r.test_f1 = learner.evaluate(model, golden.test).f1();
    result.reports.push_back(r);
    if (on_iteration) on_iteration(r);
    return r;
  };

  Model current = learner.fit(training, golden.dev, 1, nullptr);
  IterationReport last = record(1, current, {});
  result.best = current;
  result.best_iteration = 1;
  double best_score = selection_score(last, cfg.select_on);
  result.stop_reason = "max_iterations reached";

  for (std::size_t k = 2; k <= cfg.max_iterations; ++k) {
    const auto target = static_cast<std::size_t>(
        std::ceil((cfg.growth_factor - 1.0) * static_cast<double>(training.size())));
    const std::size_t syn_quota = std::min(
        synthetic_pool.size(),
        static_cast<std::size_t>(std::llround(cfg.synthetic_fraction * static_cast<double>(target))));
    const std::size_t noisy_quota = std::min(noisy_pool.size(), target - std::min(target, syn_quota));
    if (syn_quota == 0 && noisy_quota == 0) {
      result.stop_reason = "noisy and synthetic pools exhausted";
      break;
    }

    IterationReport r;
    const Dataset syn_remaining = subset(synthetic, synthetic_pool);
    const auto syn_pick =
        stratified_sample_indices(syn_remaining, syn_quota, Rng::derive(cfg.seed, 2 * k).next());
    const Dataset noisy_remaining = subset(noisy, noisy_pool);
    const auto noisy_pick =
        stratified_sample_indices(noisy_remaining, noisy_quota, Rng::derive(cfg.seed, 2 * k + 1).next());
    const Dataset noisy_sample = subset(noisy_remaining, noisy_pick);
    const auto accepted = noisy_sample.empty() ? std::vector<std::size_t>{}
                                               : consensus_indices(learner, current, noisy_sample);
    r.noisy_sampled = noisy_pick.size();
    r.noisy_accepted = accepted.size();
    r.synthetic_added = syn_pick.size();
    if (syn_pick.empty() && accepted.empty()) {
      result.stop_reason = "no sampled query passed the consensus filter";
      break;
    }

    std::vector<bool> drop_syn(synthetic_pool.size(), false), drop_noisy(noisy_pool.size(), false);
    for (auto i : syn_pick) {
      training.items.push_back(syn_remaining.items[i]);
      result.additions.push_back({k, Source::Synthetic, synthetic_pool[i]});
      drop_syn[i] = true;
    }
    for (auto a : accepted) {
      const std::size_t i = noisy_pick[a];
      training.items.push_back(noisy_remaining.items[i]);
      result.additions.push_back({k, Source::Noisy, noisy_pool[i]});
      drop_noisy[i] = true;
    }
    auto compact = [](std::vector<std::size_t>& pool, const std::vector<bool>& drop) {
      std::size_t w = 0;
      for (std::size_t i = 0; i < pool.size(); ++i)
        if (!drop[i]) pool[w++] = pool[i];
      pool.resize(w);
    };
    compact(synthetic_pool, drop_syn);
    compact(noisy_pool, drop_noisy);

    Model next = learner.fit(training, golden.dev, k, cfg.warm_start ? &current : nullptr);
    const IterationReport now = record(k, next, r);
    const double score = selection_score(now, cfg.select_on);
    if (score > best_score) {
      best_score = score;
      result.best = next;
      result.best_iteration = k;
    }
    if (score < selection_score(last, cfg.select_on)) {
      result.stop_reason = "score decreased at iteration " + std::to_string(k);
      break;
    }
    current = std::move(next);
    last = now;
  }
  result.final_training = std::move(training);
  return result;
}

BaselineResult one_pass_baseline(const GoldenSplit& golden, const Dataset& noisy,
                                 const Dataset& synthetic, const AmbiguousLexicon& lexicon,
                                 const TripleLearnConfig& cfg, Learner& learner) {
  Dataset all = golden.train;
  all.items.insert(all.items.end(), noisy.items.begin(), noisy.items.end());
  all.items.insert(all.items.end(), synthetic.items.begin(), synthetic.items.end());
  all = balance_ambiguous(all, lexicon, Rng::derive(cfg.seed, 0).next());
  BaselineResult out;
  out.training_size = all.size();
  out.model = learner.fit(all, golden.dev, 0, nullptr);
  out.dev = learner.evaluate(out.model, golden.dev);
  out.test = learner.evaluate(out.model, golden.test);
  return out;
}

std::string format_iteration_table(const std::vector<IterationReport>& reports) {
  std::string out = "iter.   training  unq. BRD  unq. PRD    dev F1   test F1\n";
  char line[160];
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%5zu %10zu %9zu %9zu %9.2f %9.2f\n", r.iteration,
                  r.training_size, r.unique_brd, r.unique_prd, r.dev_f1, r.test_f1);
    out += line;
  }
  return out;
}

std::string format_iteration_record(const IterationReport& r) {
  char buf[384];
  std::snprintf(buf, sizeof buf,
                "{\"iteration\":%zu,\"training\":%zu,\"unique_brd\":%zu,\"unique_prd\":%zu,"
                "\"dev_f1\":%.4f,\"test_f1\":%.4f,\"noisy_sampled\":%zu,\"noisy_accepted\":%zu,"
                "\"synthetic_added\":%zu}",
                r.iteration, r.training_size, r.unique_brd, r.unique_prd, r.dev_f1, r.test_f1,
                r.noisy_sampled, r.noisy_accepted, r.synthetic_added);
  return buf;
}

}  // namespace qtag
