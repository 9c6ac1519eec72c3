#pragma once

#include <vector>

#include "qtag/net.hpp"

namespace qtag {

// OpenMP variants of the batch kernels. Work is split exactly as in the
// serial reference (model_loss_grads, predict_batch), and partial results
// are combined in the same order, so outputs are bit-identical to it for
// any thread count.

LossGrads model_loss_grads_parallel(const std::vector<const TaggedQuery*>& batch,
                                    const Model& model, const TrainOptions& options = {});

std::vector<Labels> predict_batch(const Model& model, const std::vector<Tokens>& queries);
std::vector<Labels> predict_batch_parallel(const Model& model, const std::vector<Tokens>& queries);

// Number of threads OpenMP will use (1 when built without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace qtag
