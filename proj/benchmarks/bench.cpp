#include <benchmark/benchmark.h>

#include "wks/dataset.hpp"
#include "wks/layers.hpp"
#include "wks/losses.hpp"
#include "wks/lstm.hpp"
#include "wks/model.hpp"
#include "wks/rng.hpp"
#include "wks/trainer.hpp"
#include "wks/wake_sim.hpp"

using namespace wks;

namespace {

void bm_conv1_forward(benchmark::State& state) {
  nn::ParameterSet params;
  Rng rng(1);
  nn::Conv1d conv(params, "conv", 3, 32, 5, rng);
  nn::Tensor x = nn::Tensor::uniform({64, 3, 64}, 1.0, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv.forward(x));
  }
}
BENCHMARK(bm_conv1_forward);

void bm_bilstm_forward(benchmark::State& state) {
  nn::ParameterSet params;
  Rng rng(2);
  nn::BiLstm lstm(params, "lstm", 64, 64, rng);
  nn::Tensor x = nn::Tensor::uniform({64, 14, 64}, 1.0, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lstm.forward(x));
  }
}
BENCHMARK(bm_bilstm_forward);

void bm_train_step(benchmark::State& state) {
  est::ModelConfig config;
  nn::ParameterSet params;
  Rng rng(3);
  est::Estimator model(config, params, rng);
  nn::Tensor x = nn::Tensor::uniform({64, config.sl, config.sensors}, 1.0, rng);
  std::vector<double> tx(64);
  std::vector<int> tv(64), td(64);
  for (std::size_t i = 0; i < 64; ++i) {
    tx[i] = rng.uniform(-1.0, 1.0);
    tv[i] = static_cast<int>(rng.below(config.speed_classes));
    td[i] = static_cast<int>(rng.below(2));
  }
  nn::AdamConfig adam;
  Rng drop(4);
  for (auto _ : state) {
    est::Output out = model.forward(x, nn::Mode::kTrain, &drop);
    nn::Tensor gx, gv, gd;
    nn::mse_loss(out.x, tx, &gx);
    nn::softmax_cross_entropy(out.v_logits, tv, &gv);
    nn::softmax_cross_entropy(out.d_logits, td, &gd);
    params.zero_grads();
    model.backward(gx, gv, gd);
    params.adam_step(adam);
  }
}
BENCHMARK(bm_train_step)->Unit(benchmark::kMillisecond);

void bm_simulate_trial(benchmark::State& state) {
  sim::Scenario scenario;
  sim::SensorGeometry geometry;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim::simulate_trial(scenario, geometry));
  }
}
BENCHMARK(bm_simulate_trial);

void bm_build_dataset(benchmark::State& state) {
  sim::Scenario base;
  auto scenarios = sim::scenario_grid({250.0}, {400.0, 800.0}, {sim::Direction::P, sim::Direction::N}, base);
  auto traces = sim::generate_corpus(scenarios, sim::SensorGeometry{}, sim::WakeParams{}, 1, 7);
  data::DatasetOptions options;
  options.sl = 64;
  options.stride = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(data::build_dataset(traces, options));
  }
}
BENCHMARK(bm_build_dataset)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
