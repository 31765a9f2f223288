// SPDX-License-Identifier: Apache-2.0
#include "stgat/gat.hpp"
#include "stgat/model.hpp"
#include "stgat/training.hpp"

#include <benchmark/benchmark.h>

using namespace stgat;

namespace {

Tensor random_windows(std::size_t batch, Rng& rng) {
    std::vector<double> values(batch * 4 * 7);
    for (double& v : values) {
        v = rng.uniform(0.0, 1.0);
    }
    return Tensor::from_values({batch, 4, 7}, std::move(values));
}

void FusionForward(benchmark::State& state) {
    ModelConfig cfg;
    FusionModel model(cfg);
    Rng rng(1);
    Tensor x = random_windows(static_cast<std::size_t>(state.range(0)), rng);
    for (auto _ : state) {
        Tensor y = model.forward(x);
        benchmark::DoNotOptimize(y.values().data());
    }
}
BENCHMARK(FusionForward)->Arg(1)->Arg(8)->Arg(32);

void FusionTrainStep(benchmark::State& state) {
    ModelConfig cfg;
    FusionModel model(cfg);
    Rng rng(2);
    Tensor x = random_windows(32, rng);
    std::vector<double> t(32);
    for (double& v : t) {
        v = rng.uniform(0.0, 1.0);
    }
    Tensor target = Tensor::from_values({32}, std::move(t));
    TrainConfig tc;
    AdamState adam = AdamState::for_parameters(model.parameters());
    for (auto _ : state) {
        {
            Tape tape;
            Tensor loss = mse_loss(model.forward(x), target);
            tape.backward(loss);
        }
        adam_step(model.parameters(), adam, tc);
        for (Tensor& p : model.parameters()) {
            p.zero_grad();
        }
    }
}
BENCHMARK(FusionTrainStep);

void GatLayerBatch(benchmark::State& state) {
    Rng rng(3);
    Gatv2Layer layer = Gatv2Layer::init(32, 32, 32, 0.2, rng);
    Graph graph = Graph::complete(7, true);
    std::vector<double> values(32 * 7 * 32);
    for (double& v : values) {
        v = rng.uniform(-1.0, 1.0);
    }
    Tensor features = Tensor::from_values({32, 7, 32}, std::move(values));
    for (auto _ : state) {
        Tensor out = layer.forward_batch(features, graph);
        benchmark::DoNotOptimize(out.values().data());
    }
}
BENCHMARK(GatLayerBatch);

void LstmForward(benchmark::State& state) {
    Rng rng(4);
    LstmLayer layer = LstmLayer::init(96, 64, rng);
    std::vector<double> values(32 * 4 * 96);
    for (double& v : values) {
        v = rng.uniform(-1.0, 1.0);
    }
    Tensor x = Tensor::from_values({32, 4, 96}, std::move(values));
    for (auto _ : state) {
        auto out = layer.forward(x);
        benchmark::DoNotOptimize(out.hidden.values().data());
    }
}
BENCHMARK(LstmForward);

} // namespace

BENCHMARK_MAIN();
