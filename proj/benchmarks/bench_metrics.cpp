#include <benchmark/benchmark.h>

#include "plab/diagnostics.hpp"
#include "plab/rng.hpp"

using namespace plab;

static void BM_AttentionRowSpread(benchmark::State& state) {
    Rng rng(3);
    const int len = int(state.range(0));
    std::vector<double> row(static_cast<size_t>(len));
    double sum = 0.0;
    for (auto& v : row) {
        v = rng.uniform01() + 1e-9;
        sum += v;
    }
    for (auto& v : row) {
        v /= sum;
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(attention_row_spread_pct(row.data(), len));
    }
}
BENCHMARK(BM_AttentionRowSpread)->Arg(8)->Arg(24);

static void BM_ActivationOverlap(benchmark::State& state) {
    Rng rng(5);
    const int cells = int(state.range(0));
    ActivationMatrix a, b;
    a.layers = b.layers = 1;
    a.units_per_layer = b.units_per_layer = cells;
    a.active.resize(static_cast<size_t>(cells));
    b.active.resize(static_cast<size_t>(cells));
    for (int i = 0; i < cells; ++i) {
        a.active[size_t(i)] = rng.uniform01() < 0.3;
        b.active[size_t(i)] = rng.uniform01() < 0.3;
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(activation_overlap(a, b));
    }
}
BENCHMARK(BM_ActivationOverlap)->Arg(512)->Arg(2048);

static void BM_QuantileCi(benchmark::State& state) {
    Rng rng(7);
    std::vector<double> scores(static_cast<size_t>(state.range(0)));
    for (auto& s : scores) {
        s = rng.gauss(0.0, 1.0);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(quantile_ci(scores));
    }
}
BENCHMARK(BM_QuantileCi)->Arg(30)->Arg(300);

static void BM_BootstrapMeanCi(benchmark::State& state) {
    Rng rng(9);
    std::vector<double> items(static_cast<size_t>(state.range(0)));
    for (auto& v : items) {
        v = rng.gauss(0.0, 1.0);
    }
    const IndexStat stat = [&](const std::vector<size_t>& idx) {
        double s = 0.0;
        for (size_t i : idx) {
            s += items[i];
        }
        return s / double(idx.size());
    };
    uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(bootstrap_ci(stat, items.size(), seed++));
    }
}
BENCHMARK(BM_BootstrapMeanCi)->Arg(24)->Arg(96);

static void BM_Pearson(benchmark::State& state) {
    Rng rng(11);
    const size_t n = static_cast<size_t>(state.range(0));
    std::vector<double> xs(n), ys(n);
    for (size_t i = 0; i < n; ++i) {
        xs[i] = rng.gauss(0.0, 1.0);
        ys[i] = 0.5 * xs[i] + rng.gauss(0.0, 1.0);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(pearson(xs, ys));
    }
}
BENCHMARK(BM_Pearson)->Arg(100)->Arg(1000);
