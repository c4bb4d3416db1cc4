#include <benchmark/benchmark.h>

#include "plab/model.hpp"
#include "plab/rng.hpp"

using namespace plab;

namespace {

ModelConfig desk_model(int vocab = 600) {
    ModelConfig cfg;
    cfg.num_layers = 2;
    cfg.num_heads = 4;
    cfg.model_dim = 64;
    cfg.ff_dim = 256;
    cfg.vocab_size = vocab;
    cfg.context_length = 24;
    return cfg;
}

MixedSequence random_tokens(const ModelConfig& cfg, int len, uint64_t seed) {
    Rng rng(seed);
    std::vector<int> ids;
    for (int t = 0; t < len; ++t) {
        ids.push_back(int(rng.below(uint64_t(cfg.vocab_size))));
    }
    return MixedSequence::from_tokens(ids);
}

} // namespace

static void BM_ForwardBySeqLen(benchmark::State& state) {
    const ModelConfig cfg = desk_model();
    Rng rng(1);
    const auto params = Parameters<float>::init_random(cfg, rng, 0.1);
    const MixedSequence seq = random_tokens(cfg, int(state.range(0)), 2);
    Workspace<float> ws;
    for (auto _ : state) {
        forward_ws(params, seq, ws);
        benchmark::DoNotOptimize(ws.logits.data.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBySeqLen)->Arg(4)->Arg(8)->Arg(16)->Arg(23);

static void BM_ForwardHeadAtLastOnly(benchmark::State& state) {
    const ModelConfig cfg = desk_model();
    Rng rng(1);
    const auto params = Parameters<float>::init_random(cfg, rng, 0.1);
    const MixedSequence seq = random_tokens(cfg, 8, 2);
    Workspace<float> ws;
    for (auto _ : state) {
        forward_ws(params, seq, ws, static_cast<const UnitDelta<float>*>(nullptr), seq.length() - 1);
        benchmark::DoNotOptimize(ws.logits.data.data());
    }
}
BENCHMARK(BM_ForwardHeadAtLastOnly);

static void BM_LossAndGradients(benchmark::State& state) {
    const ModelConfig cfg = desk_model();
    Rng rng(1);
    const auto params = Parameters<float>::init_random(cfg, rng, 0.1);
    const MixedSequence seq = random_tokens(cfg, 8, 3);
    const LossSpec spec{LossMode::nll, 7, 11};
    for (auto _ : state) {
        auto res = loss_and_gradients(params, seq, spec);
        benchmark::DoNotOptimize(res.value);
    }
}
BENCHMARK(BM_LossAndGradients);

static void BM_TraceCapture(benchmark::State& state) {
    const ModelConfig cfg = desk_model();
    Rng rng(1);
    const auto params = Parameters<float>::init_random(cfg, rng, 0.1);
    const MixedSequence seq = random_tokens(cfg, 12, 4);
    for (auto _ : state) {
        auto trace = forward(params, seq);
        benchmark::DoNotOptimize(trace.logits.data.data());
    }
}
BENCHMARK(BM_TraceCapture);

BENCHMARK_MAIN();
