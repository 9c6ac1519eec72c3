#include "qtag/parallel.hpp"

#include <algorithm>
#include <cstddef>
#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qtag {

LossGrads model_loss_grads_parallel(const std::vector<const TaggedQuery*>& batch,
                                    const Model& model, const TrainOptions& options) {
  if (batch.empty()) throw ValidationError("empty training batch");
  double scale = 1.0 / static_cast<double>(batch.size());
  if (!model.use_crf) {
    std::size_t tokens = 0;
    for (const auto* q : batch) tokens += q->tokens.size();
    scale = 1.0 / static_cast<double>(tokens);
  }
  const std::size_t shards = std::min(kGradShards, batch.size());
  std::vector<Weights> partial(shards);
  std::vector<double> losses(shards, 0.0);
  std::vector<std::exception_ptr> errors(shards);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(shards); ++s) {
    const auto su = static_cast<std::size_t>(s);
    try {
      partial[su] = model.weights.zeros_like();
      const std::size_t lo = su * batch.size() / shards, hi = (su + 1) * batch.size() / shards;
      for (std::size_t i = lo; i < hi; ++i)
        losses[su] += accumulate_query_grads(*batch[i], model, scale, options, i, partial[su]);
    } catch (...) {
      errors[su] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  LossGrads total{0.0, model.weights.zeros_like()};
  for (std::size_t s = 0; s < shards; ++s) {
    total.loss += losses[s];
    total.grads.add(partial[s]);
  }
  return total;
}

std::vector<Labels> predict_batch(const Model& model, const std::vector<Tokens>& queries) {
  std::vector<Labels> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(decode_labels(model, q));
  return out;
}

std::vector<Labels> predict_batch_parallel(const Model& model, const std::vector<Tokens>& queries) {
  std::vector<Labels> out(queries.size());
  std::vector<std::exception_ptr> errors(queries.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(queries.size()); ++i) {
    const auto iu = static_cast<std::size_t>(i);
    try {
      out[iu] = decode_labels(model, queries[iu]);
    } catch (...) {
      errors[iu] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace qtag
