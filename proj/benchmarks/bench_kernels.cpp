#include <benchmark/benchmark.h>

#include "lintrain/arch.hpp"
#include "lintrain/autodiff.hpp"
#include "lintrain/diagnostics.hpp"
#include "lintrain/ops.hpp"
#include "lintrain/rng.hpp"
#include "lintrain/tangent.hpp"

using namespace lintrain;

namespace {

template <typename T>
TensorT<T> random_tensor(std::vector<std::int64_t> shape, std::uint64_t seed) {
    Xoshiro256 rng(seed);
    TensorT<T> t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<T>(2.0 * rng.next_unit() - 1.0);
    return t;
}

void BM_matmul_nt_f32(benchmark::State& state) {
    const std::int64_t n = state.range(0);
    const auto a = random_tensor<float>({n, n}, 1);
    const auto b = random_tensor<float>({n, n}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(ops::matmul_nt(a, b));
    state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_matmul_nt_f32)->Arg(128)->Arg(256)->Arg(512);

void BM_conv2d_lenet1_f32(benchmark::State& state) {
    const auto x = random_tensor<float>({32, 1, 32, 32}, 3);
    const auto k = random_tensor<float>({6, 1, 5, 5}, 4);
    const auto b = random_tensor<float>({6}, 5);
    for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, k, b, 1, 0));
}
BENCHMARK(BM_conv2d_lenet1_f32);

template <typename T>
void BM_lenet_train_step(benchmark::State& state) {
    const NetworkSpec spec = build_lenet(state.range(0), 1, 10);
    auto w = init_params<T>(spec, 7);
    const auto batch = random_tensor<T>({32, 1, 32, 32}, 8);
    const auto targets = random_tensor<T>({32, 10}, 9);
    for (auto _ : state) {
        auto [out, graph] = forward(spec, w, batch);
        benchmark::DoNotOptimize(vjp(graph, ops::l2_loss_cotangent(out, targets)));
    }
}
BENCHMARK(BM_lenet_train_step<float>)->Arg(1)->Arg(2);
BENCHMARK(BM_lenet_train_step<double>)->Arg(1);

void BM_tangent_step_lenet1_f32(benchmark::State& state) {
    const NetworkSpec spec = build_lenet(1, 1, 10);
    auto tm = make_tangent(spec, init_params<float>(spec, 10));
    const auto batch = random_tensor<float>({32, 1, 32, 32}, 11);
    const auto targets = random_tensor<float>({32, 10}, 12);
    for (auto _ : state)
        benchmark::DoNotOptimize(tangent_loss_grad(tm, batch, targets));
}
BENCHMARK(BM_tangent_step_lenet1_f32);

void BM_embed_rows_lenet1_f32(benchmark::State& state) {
    const NetworkSpec spec = build_lenet(1, 1, 10);
    auto tm = make_tangent(spec, init_params<float>(spec, 13));
    const auto examples = random_tensor<float>({4, 1, 32, 32}, 14);
    for (auto _ : state)
        benchmark::DoNotOptimize(embed_rows(tm, examples, 0, 4));
}
BENCHMARK(BM_embed_rows_lenet1_f32);

void BM_jacobi_eig(benchmark::State& state) {
    const std::int64_t n = state.range(0);
    const auto rows = random_tensor<double>({n, n + 16}, 15);
    const auto g = diagnostics::gram(rows);
    for (auto _ : state) benchmark::DoNotOptimize(diagnostics::sym_eig(g));
}
BENCHMARK(BM_jacobi_eig)->Arg(64)->Arg(200)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
