// SPDX-License-Identifier: Apache-2.0
#include "stgat/rng.hpp"
#include "stgat/tensor.hpp"

#include <benchmark/benchmark.h>

using namespace stgat;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
    std::size_t n = shape_size(shape);
    std::vector<double> values(n);
    for (double& v : values) {
        v = rng.uniform(-1.0, 1.0);
    }
    return Tensor::from_values(std::move(shape), std::move(values));
}

void MatMul(benchmark::State& state) {
    std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    Tensor a = random_tensor({n, n}, rng);
    Tensor b = random_tensor({n, n}, rng);
    for (auto _ : state) {
        Tensor c = matmul(a, b);
        benchmark::DoNotOptimize(c.values().data());
    }
    state.SetComplexityN(static_cast<std::int64_t>(n));
}
BENCHMARK(MatMul)->RangeMultiplier(2)->Range(16, 256)->Complexity();

void SoftmaxRows(benchmark::State& state) {
    Rng rng(2);
    Tensor x = random_tensor({static_cast<std::size_t>(state.range(0)), 64}, rng);
    for (auto _ : state) {
        Tensor y = softmax_axis(x, 1);
        benchmark::DoNotOptimize(y.values().data());
    }
}
BENCHMARK(SoftmaxRows)->Range(8, 512);

void BroadcastAdd(benchmark::State& state) {
    Rng rng(3);
    Tensor a = random_tensor({32, 7, 1, 32}, rng);
    Tensor b = random_tensor({32, 1, 7, 32}, rng);
    for (auto _ : state) {
        Tensor c = add(a, b);
        benchmark::DoNotOptimize(c.values().data());
    }
}
BENCHMARK(BroadcastAdd);

void SumSquaresBackward(benchmark::State& state) {
    Rng rng(4);
    Tensor x = random_tensor({static_cast<std::size_t>(state.range(0))}, rng);
    x.set_requires_grad(true);
    for (auto _ : state) {
        Tape tape;
        Tensor loss = sum_axis(mul(x, x), 0);
        tape.backward(loss);
        x.zero_grad();
    }
}
BENCHMARK(SumSquaresBackward)->Range(256, 65536);

} // namespace

BENCHMARK_MAIN();
