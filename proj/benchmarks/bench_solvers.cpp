#include <benchmark/benchmark.h>

#include "hypou/structure.hpp"

namespace {

void bench_kalman_rank(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    hypou::Mat A = hypou::Mat::Zero(n, n);
    for (int i = 1; i < n; ++i) A(i, i - 1) = 1.0;
    hypou::Mat B = hypou::Mat::Zero(n, n);
    B(0, 0) = 1.0;
    for (auto _ : state)
        benchmark::DoNotOptimize(hypou::kalman_rank(A, B, n));
}
BENCHMARK(bench_kalman_rank)->Arg(4)->Arg(8)->Arg(16);

} // namespace

BENCHMARK_MAIN();
