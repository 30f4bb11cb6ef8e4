#include "macroq/complexity.hpp"
#include "macroq/eval.hpp"
#include "macroq/net.hpp"
#include "macroq/rng.hpp"
#include "macroq/train.hpp"

#include <benchmark/benchmark.h>

using namespace macroq;

namespace {

Architecture arch_for(int depth, int k) {
    return depth == 0 ? Architecture::affine(k)
                      : Architecture::hidden(k, std::vector<int>(depth, 8), 0.5);
}

Eigen::VectorXd random_x(int k, Rng& rng) {
    Eigen::VectorXd x(k);
    for (int j = 0; j < k; ++j) x(j) = rng.next_normal();
    return x;
}

void bm_forward(benchmark::State& state) {
    const int k = 130;
    Architecture arch = arch_for(static_cast<int>(state.range(0)), k);
    ParamSet params = init_params(arch, 1);
    Rng rng(2);
    Eigen::VectorXd x = random_x(k, rng);
    ForwardWorkspace ws;
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(arch, params, x, ws));
    }
}
BENCHMARK(bm_forward)->Arg(0)->Arg(1)->Arg(2);

void bm_backward(benchmark::State& state) {
    const int k = 130;
    Architecture arch = arch_for(static_cast<int>(state.range(0)), k);
    ParamSet params = init_params(arch, 1);
    ParamSet grad = ParamSet::zeros(arch);
    Rng rng(2);
    Eigen::VectorXd x = random_x(k, rng);
    ForwardWorkspace ws;
    for (auto _ : state) {
        forward(arch, params, x, ws);
        backward_accumulate(arch, params, x, ws, 0.5, grad);
        benchmark::DoNotOptimize(grad.intercept);
    }
}
BENCHMARK(bm_backward)->Arg(0)->Arg(1)->Arg(2);

void bm_fit_epochs(benchmark::State& state) {
    const int n = 240, k = 130;
    Rng rng(7);
    Eigen::MatrixXd X(n, k);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) X(i, j) = rng.next_normal();
        y(i) = X(i, 0) + rng.next_normal();
    }
    Architecture arch = arch_for(static_cast<int>(state.range(0)), k);
    TrainConfig tc = TrainConfig::defaults_for(arch.depth);
    tc.epochs_initial = 50;
    for (auto _ : state) {
        Checkpoint ck = fit(X, y, arch, 0.1, LossSpec::pinball(0.9), tc, 3, nullptr);
        benchmark::DoNotOptimize(ck.final_objective);
    }
    state.SetItemsProcessed(state.iterations() * tc.epochs_initial);
}
BENCHMARK(bm_fit_epochs)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void bm_hac_se(benchmark::State& state) {
    Rng rng(11);
    std::vector<double> series(static_cast<size_t>(state.range(0)));
    for (double& v : series) v = rng.next_normal();
    for (auto _ : state) {
        benchmark::DoNotOptimize(hac_se(series, 12));
    }
}
BENCHMARK(bm_hac_se)->Arg(300)->Arg(10000);

void bm_naive_quantile(benchmark::State& state) {
    Rng rng(13);
    std::vector<double> history(static_cast<size_t>(state.range(0)));
    for (double& v : history) v = rng.next_normal();
    for (auto _ : state) {
        benchmark::DoNotOptimize(naive_quantile(history, 0.95));
    }
}
BENCHMARK(bm_naive_quantile)->Arg(240)->Arg(770);

} // namespace

BENCHMARK_MAIN();
