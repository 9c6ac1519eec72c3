#include <benchmark/benchmark.h>

#include <algorithm>
#include <chrono>
#include <vector>

#include "qtag/datagen.hpp"
#include "qtag/parallel.hpp"
#include "qtag/service.hpp"

using namespace qtag;

namespace {

struct Fixture {
  MiniWorld world;
  Model model;
  std::vector<const TaggedQuery*> batch;
  std::vector<Tokens> queries;

  Fixture() {
    MiniWorldConfig mc;
    mc.n_noisy = 1000;
    world = generate_miniworld(mc);
    model = init_params(ModelDims{}, Vocab::build({&world.golden, &world.noisy}), nullptr, 7);
    for (std::size_t i = 0; i < 256; ++i) batch.push_back(&world.noisy.items[i]);
    for (const auto& q : world.noisy.items) queries.push_back(q.tokens);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_LossGradsSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(model_loss_grads(f.batch, f.model).loss);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.batch.size()));
}

void BM_LossGradsParallel(benchmark::State& state) {
  const auto& f = fixture();
  set_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(model_loss_grads_parallel(f.batch, f.model).loss);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.batch.size()));
}

void BM_PredictSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(predict_batch(f.model, f.queries).size());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.queries.size()));
}

void BM_PredictParallel(benchmark::State& state) {
  const auto& f = fixture();
  set_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(predict_batch_parallel(f.model, f.queries).size());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.queries.size()));
}

// Single-query service path; reports p50/p99 in microseconds.
void BM_TagLatency(benchmark::State& state) {
  const auto& f = fixture();
  std::vector<std::string> raw;
  for (const auto& q : f.world.noisy.items) raw.push_back(join(q.tokens));
  std::vector<double> us;
  std::size_t i = 0;
  for (auto _ : state) {
    const auto t0 = std::chrono::steady_clock::now();
    benchmark::DoNotOptimize(tag_query(f.model, raw[i++ % raw.size()]).labels.size());
    us.push_back(std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(us.begin(), us.end());
  auto pct = [&](double p) { return us[std::min(us.size() - 1, static_cast<std::size_t>(p * us.size()))]; };
  state.counters["p50_us"] = pct(0.50);
  state.counters["p99_us"] = pct(0.99);
}

}  // namespace

BENCHMARK(BM_LossGradsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossGradsParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TagLatency)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
