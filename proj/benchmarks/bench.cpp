// Microbenchmarks for the pipeline hot spots: dynamic graph construction,
// neighbor aggregation, assignment, convolution, and the full block forward.

#include <benchmark/benchmark.h>

#include "swg/blocks.hpp"
#include "swg/features.hpp"
#include "swg/metrics.hpp"

using namespace swg;

namespace {

Tensor random_tensor(std::vector<size_t> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal();
    return t;
}

void bm_knn_graph(benchmark::State& state) {
    size_t n = size_t(state.range(0)), k = size_t(state.range(1));
    Rng rng(1);
    Tensor h = random_tensor({n, 25}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(knn_graph(h, k));
}

void bm_conv2d_agg(benchmark::State& state) {
    size_t n = size_t(state.range(0)), k = size_t(state.range(1)), t = 25;
    Rng rng(2);
    Tensor h = random_tensor({n, t}, rng);
    NeighborIndex nbrs = knn_graph(h, k);
    Var hv(h);
    Var w = make_parameter(Tensor::full({k}, 1.0 / double(k)));
    Var b = make_parameter(Tensor::zeros({1}));
    for (auto _ : state) benchmark::DoNotOptimize(conv2d_agg(hv, nbrs, w, b).value());
}

void bm_hungarian(benchmark::State& state) {
    size_t n = size_t(state.range(0));
    Rng rng(3);
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (auto& row : cost)
        for (auto& v : row) v = rng.uniform(0.0, 100.0);
    for (auto _ : state) benchmark::DoNotOptimize(hungarian(cost));
}

void bm_conv2d(benchmark::State& state) {
    size_t c = size_t(state.range(0));
    Rng rng(4);
    Var x(random_tensor({1, c, 64, 32}, rng));
    Var kern = make_parameter(random_tensor({c, c, 3, 3}, rng));
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, kern, 1, 1, 1, 1).value());
}

void bm_stft(benchmark::State& state) {
    SpectralConfig cfg;
    Rng rng(5);
    AudioClip clip{random_tensor({4, cfg.samples_for_frames(250)}, rng), cfg.sample_rate};
    for (auto _ : state) benchmark::DoNotOptimize(stft(clip, cfg));
}

void bm_swg_block_forward(benchmark::State& state) {
    SwgBlockConfig bc;
    bc.t = size_t(state.range(0));
    bc.k = 8;
    bc.d_model = 64;
    bc.n_heads = 4;
    bc.ff_ratio = 2;
    bc.graph_ffn_ratio = 2;
    bc.dropout_rate = 0.0;
    Rng rng(6);
    SwgBlockParams p;
    p.init(bc, rng);
    Var x(random_tensor({250, 16, 4}, rng));
    for (auto _ : state)
        benchmark::DoNotOptimize(swg_former_block_forward(x, bc, p, false, rng).value());
}

}  // namespace

BENCHMARK(bm_knn_graph)->Args({64, 8})->Args({256, 24})->Args({512, 24});
BENCHMARK(bm_conv2d_agg)->Args({64, 8})->Args({256, 24});
BENCHMARK(bm_hungarian)->Arg(8)->Arg(32)->Arg(128);
BENCHMARK(bm_conv2d)->Arg(4)->Arg(16)->Arg(64);
BENCHMARK(bm_stft);
BENCHMARK(bm_swg_block_forward)->Arg(5)->Arg(25);

BENCHMARK_MAIN();
