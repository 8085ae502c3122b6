#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "genad/data/synthetic.hpp"
#include "genad/data/normalize.hpp"
#include "genad/data/windows.hpp"
#include "genad/detect/threshold.hpp"
#include "genad/model/genad_model.hpp"
#include "genad/numerics/adam.hpp"
#include "genad/runtime.hpp"

namespace {

using genad::model::ModelConfig;

ModelConfig sized(std::int64_t d_model, std::int64_t layers) {
  ModelConfig c;
  c.d_model = static_cast<std::size_t>(d_model);
  c.d_ff = 2 * c.d_model;
  c.n_layers = static_cast<std::size_t>(layers);
  c.n_heads = c.d_model >= 32 ? 8 : 4;
  return c;
}

std::vector<genad::data::WindowSample> sample_windows(const ModelConfig& c, std::size_t count) {
  genad::data::SyntheticSpec spec;
  spec.n_metrics = c.n_metrics;
  spec.n_points = 960;
  const auto frame = genad::data::gen_genad_synthetic(spec);
  const auto normalized = genad::data::fit_normalize(frame, {0, frame.length()}).first;
  std::vector<genad::data::WindowSample> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(genad::data::make_window(normalized, i * 7, c.t_e));
  return out;
}

void BM_ReconstructAll(benchmark::State& state) {
  const ModelConfig c = sized(state.range(0), state.range(1));
  const genad::model::GenADModel model(c);
  const auto windows = sample_windows(c, 1);
  for (auto _ : state) benchmark::DoNotOptimize(genad::model::reconstruct_all(windows[0], model));
}
BENCHMARK(BM_ReconstructAll)->Args({64, 4})->Args({32, 2})->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  ModelConfig c = sized(state.range(0), state.range(1));
  const auto batch_size = static_cast<std::size_t>(state.range(2));
  genad::model::GenADModel model(c);
  const auto windows = sample_windows(c, batch_size);
  std::mt19937_64 rng(1);
  std::vector<genad::model::MaskPlan> plans;
  for (std::size_t b = 0; b < batch_size; ++b) plans.push_back(genad::model::build_mask_plan(c.n_metrics, c.mask_ratio, rng));
  genad::numerics::AdamState adam;
  for (auto _ : state) {
    genad::numerics::Tape tape;
    genad::numerics::BoundParameters bound(tape, model.parameters());
    genad::model::ForwardOptions options{&rng};
    auto recon = genad::model::forward_batch(bound, model, windows, plans, options);
    auto loss = genad::model::masked_loss(recon, windows, plans);
    tape.backward(loss);
    genad::numerics::adam_step(adam, model.parameters(), bound.gradients());
  }
}
BENCHMARK(BM_TrainStep)
    ->Args({64, 4, 32})
    ->Args({32, 2, 16})
    ->Args({32, 2, 8})
    ->Args({16, 2, 8})
    ->Unit(benchmark::kMillisecond);

void BM_EstimateGate(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> dist(1.0);
  std::vector<double> errors(static_cast<std::size_t>(state.range(0)));
  for (double& e : errors) e = dist(rng);
  for (auto _ : state) benchmark::DoNotOptimize(genad::detect::estimate_gate(errors, 0.05, 0.0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EstimateGate)->Arg(1000)->Arg(100000);

}  // namespace

int main(int argc, char** argv) {
  genad::tune_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
