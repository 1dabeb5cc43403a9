// reference vs parallel kernels on generator/discriminator-sized layers
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "oxy/nn/kernels.hpp"

using namespace oxy::nn;

namespace {

std::vector<float> noise(std::size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<float> d(0.0f, 1.0f);
    std::vector<float> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

ConvGeometry geom(const benchmark::State& st) {
    ConvGeometry g;
    g.c_in = static_cast<int>(st.range(0));
    g.c_out = static_cast<int>(st.range(1));
    g.h = g.w = static_cast<int>(st.range(2));
    g.k = static_cast<int>(st.range(3));
    g.stride = static_cast<int>(st.range(4));
    g.pad = g.k / 2;
    if (g.k == 4) g.pad = 1;
    return g;
}

template <bool Parallel>
void BM_conv_forward(benchmark::State& st) {
    const auto g = geom(st);
    const auto x = noise(g.in_size(), 1), w = noise(g.weight_size(), 2), b = noise(g.c_out, 3);
    std::vector<float> y(g.out_size());
    for (auto _ : st) {
        if constexpr (Parallel)
            kernels::parallel::conv2d_forward(g, x.data(), w.data(), b.data(), y.data());
        else
            kernels::reference::conv2d_forward(g, x.data(), w.data(), b.data(), y.data());
        benchmark::DoNotOptimize(y.data());
    }
    st.counters["MFLOP"] = 2.0 * g.out_size() * g.c_in * g.k * g.k / 1e6;
}

template <bool Parallel>
void BM_conv_backward(benchmark::State& st) {
    const auto g = geom(st);
    const auto x = noise(g.in_size(), 1), w = noise(g.weight_size(), 2), dy = noise(g.out_size(), 4);
    std::vector<float> dx(g.in_size()), dw(g.weight_size()), db(g.c_out);
    for (auto _ : st) {
        if constexpr (Parallel) {
            kernels::parallel::conv2d_backward_input(g, w.data(), dy.data(), dx.data());
            kernels::parallel::conv2d_backward_weight(g, x.data(), dy.data(), dw.data(), db.data());
        } else {
            kernels::reference::conv2d_backward_input(g, w.data(), dy.data(), dx.data());
            kernels::reference::conv2d_backward_weight(g, x.data(), dy.data(), dw.data(), db.data());
        }
        benchmark::DoNotOptimize(dx.data());
        benchmark::DoNotOptimize(dw.data());
    }
}

template <bool Parallel>
void BM_instance_norm(benchmark::State& st) {
    NormGeometry g{1, static_cast<int>(st.range(0)), static_cast<int>(st.range(1) * st.range(1))};
    const std::size_t n = static_cast<std::size_t>(g.c) * g.plane;
    const auto x = noise(n, 5), dy = noise(n, 6);
    std::vector<float> scale(g.c, 1.0f), shift(g.c, 0.0f), y(n), xhat(n), inv(g.c), dx(n), ds(g.c), dsh(g.c);
    for (auto _ : st) {
        if constexpr (Parallel) {
            kernels::parallel::instance_norm_forward(g, x.data(), scale.data(), shift.data(), 1e-5f, y.data(),
                                                     xhat.data(), inv.data());
            kernels::parallel::instance_norm_backward(g, xhat.data(), inv.data(), scale.data(), dy.data(), dx.data(),
                                                      ds.data(), dsh.data());
        } else {
            kernels::reference::instance_norm_forward(g, x.data(), scale.data(), shift.data(), 1e-5f, y.data(),
                                                      xhat.data(), inv.data());
            kernels::reference::instance_norm_backward(g, xhat.data(), inv.data(), scale.data(), dy.data(), dx.data(),
                                                       ds.data(), dsh.data());
        }
        benchmark::DoNotOptimize(dx.data());
    }
}

// c_in, c_out, side, k, stride
void conv_args(benchmark::internal::Benchmark* b) {
    b->Args({3, 32, 64, 7, 1});
    b->Args({64, 64, 16, 3, 1});
    b->Args({28, 64, 64, 4, 2});
    b->Args({128, 256, 16, 4, 2});
    b->Unit(benchmark::kMillisecond);
}

void norm_args(benchmark::internal::Benchmark* b) {
    b->Args({32, 64});
    b->Args({128, 16});
    b->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(BM_conv_forward<false>)->Name("conv_forward/reference")->Apply(conv_args);
BENCHMARK(BM_conv_forward<true>)->Name("conv_forward/parallel")->Apply(conv_args);
BENCHMARK(BM_conv_backward<false>)->Name("conv_backward/reference")->Apply(conv_args);
BENCHMARK(BM_conv_backward<true>)->Name("conv_backward/parallel")->Apply(conv_args);
BENCHMARK(BM_instance_norm<false>)->Name("instance_norm/reference")->Apply(norm_args);
BENCHMARK(BM_instance_norm<true>)->Name("instance_norm/parallel")->Apply(norm_args);

BENCHMARK_MAIN();
