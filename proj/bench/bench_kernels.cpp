// Serial reference vs OpenMP kernels on encoder-sized tensors.
// Args: batch, in channels, out channels, side.

#include "wsmil/kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

namespace k = wsmil::kernels;

namespace {

std::vector<double> noise(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1, 1);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

k::ConvShape shape(const benchmark::State& state) {
    return {static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), static_cast<int>(state.range(2)),
            static_cast<int>(state.range(3)), static_cast<int>(state.range(3))};
}

template <bool Parallel>
void conv_forward(benchmark::State& state) {
    const auto s = shape(state);
    const auto in = noise(s.input_size(), 1), w = noise(s.weight_size(), 2), b = noise(static_cast<std::size_t>(s.out_channels), 3);
    std::vector<double> out(s.output_size());
    for (auto _ : state) {
        if constexpr (Parallel) k::parallel::conv3x3_forward(s, in, w, b, out);
        else k::serial::conv3x3_forward(s, in, w, b, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.output_size()));
}

template <bool Parallel>
void conv_backward(benchmark::State& state) {
    const auto s = shape(state);
    const auto in = noise(s.input_size(), 1), w = noise(s.weight_size(), 2), dout = noise(s.output_size(), 4);
    std::vector<double> dw(s.weight_size()), db(static_cast<std::size_t>(s.out_channels)), din(s.input_size());
    for (auto _ : state) {
        if constexpr (Parallel) k::parallel::conv3x3_backward(s, in, dout, w, dw, db, din);
        else k::serial::conv3x3_backward(s, in, dout, w, dw, db, din);
        benchmark::DoNotOptimize(din.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.output_size()));
}

template <bool Parallel>
void dense_forward(benchmark::State& state) {
    const int batch = static_cast<int>(state.range(0)), in_dim = static_cast<int>(state.range(1)),
              out_dim = static_cast<int>(state.range(2));
    const auto in = noise(static_cast<std::size_t>(batch * in_dim), 1), w = noise(static_cast<std::size_t>(in_dim * out_dim), 2),
               b = noise(static_cast<std::size_t>(out_dim), 3);
    std::vector<double> out(static_cast<std::size_t>(batch * out_dim));
    for (auto _ : state) {
        if constexpr (Parallel) k::parallel::dense_forward(batch, in_dim, out_dim, in, w, b, out);
        else k::serial::dense_forward(batch, in_dim, out_dim, in, w, b, out);
        benchmark::DoNotOptimize(out.data());
    }
}

void conv_args(benchmark::internal::Benchmark* b) {
    b->Args({32, 3, 8, 32})->Args({32, 8, 16, 16})->Args({200, 3, 8, 32})->Unit(benchmark::kMillisecond);
}

} // namespace

BENCHMARK(conv_forward<false>)->Name("conv_forward/serial")->Apply(conv_args);
BENCHMARK(conv_forward<true>)->Name("conv_forward/parallel")->Apply(conv_args);
BENCHMARK(conv_backward<false>)->Name("conv_backward/serial")->Apply(conv_args);
BENCHMARK(conv_backward<true>)->Name("conv_backward/parallel")->Apply(conv_args);
BENCHMARK(dense_forward<false>)->Name("dense_forward/serial")->Args({256, 64, 64});
BENCHMARK(dense_forward<true>)->Name("dense_forward/parallel")->Args({256, 64, 64});

BENCHMARK_MAIN();
