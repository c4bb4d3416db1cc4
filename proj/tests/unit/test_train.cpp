#include "doctest.h"

#include <cstdio>
#include <filesystem>

#include "plab/checkpoint.hpp"
#include "plab/train.hpp"

using namespace plab;

namespace {

ModelConfig train_config_small(int vocab) {
    ModelConfig cfg;
    cfg.num_layers = 1;
    cfg.num_heads = 2;
    cfg.model_dim = 16;
    cfg.ff_dim = 32;
    cfg.vocab_size = vocab;
    cfg.context_length = 10;
    return cfg;
}

// toy corpus with a deterministic bigram structure: token k is followed by
// (k+1) mod vocab, so there is something learnable in a few hundred steps
std::vector<std::vector<int>> toy_corpus(int vocab, int lines, uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<int>> out;
    for (int i = 0; i < lines; ++i) {
        int tok = 2 + int(rng.below(uint64_t(vocab - 2)));
        std::vector<int> line;
        for (int t = 0; t < 6; ++t) {
            line.push_back(tok);
            tok = 2 + (tok - 2 + 1) % (vocab - 2);
        }
        out.push_back(line);
    }
    return out;
}

bool params_identical(const Parameters<float>& a, const Parameters<float>& b) {
    bool same = true;
    std::vector<const Mat<float>*> at, bt;
    for_each_tensor(a, [&](const char*, const Mat<float>& m) { at.push_back(&m); });
    for_each_tensor(b, [&](const char*, const Mat<float>& m) { bt.push_back(&m); });
    for (size_t i = 0; i < at.size(); ++i) {
        same = same && at[i]->data == bt[i]->data;
    }
    return same;
}

} // namespace

TEST_CASE("zero training steps returns the untouched initialization") {
    const ModelConfig cfg = train_config_small(12);
    auto corpus = toy_corpus(12, 20, 5);

    TrainConfig tc;
    tc.max_steps = 0;
    auto trained = train(corpus, cfg, tc, 77, 0);

    Rng rng(77);
    auto expected = Parameters<float>::init_random(cfg, rng, tc.weight_init_std);
    CHECK(params_identical(trained.params, expected));
    CHECK(trained.steps_run == 0);
}

TEST_CASE("same seed and corpus give bit-identical checkpoints") {
    const ModelConfig cfg = train_config_small(12);
    auto corpus = toy_corpus(12, 30, 5);

    TrainConfig tc;
    tc.max_steps = 50;
    auto run1 = train(corpus, cfg, tc, 123, 0);
    auto run2 = train(corpus, cfg, tc, 123, 0);

    CHECK(params_identical(run1.params, run2.params));
    CHECK(checkpoint_hash(run1.params) == checkpoint_hash(run2.params));

    auto run3 = train(corpus, cfg, tc, 124, 0);
    CHECK(checkpoint_hash(run1.params) != checkpoint_hash(run3.params));
}

TEST_CASE("training reduces the smoothed loss on a learnable corpus") {
    const ModelConfig cfg = train_config_small(14);
    auto corpus = toy_corpus(14, 40, 9);

    TrainConfig tc;
    tc.max_steps = 300;
    tc.batch_size = 8;
    auto result = train(corpus, cfg, tc, 7, 0);

    REQUIRE(result.step_losses.size() == 300);
    auto window_mean = [&](size_t start, size_t n) {
        double s = 0.0;
        for (size_t i = start; i < start + n; ++i) {
            s += result.step_losses[i];
        }
        return s / double(n);
    };
    const double first = window_mean(0, 20);
    const double last = window_mean(result.step_losses.size() - 20, 20);
    CHECK(last < first);
    CHECK(last < 1.0); // near-deterministic bigrams should be learned well
}

TEST_CASE("empty corpus is a configuration error") {
    const ModelConfig cfg = train_config_small(12);
    std::vector<std::vector<int>> empty;
    TrainConfig tc;
    try {
        train(empty, cfg, tc, 1, 0);
        FAIL("expected config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
    }
}

TEST_CASE("checkpoint save/load round-trips bit-exactly") {
    const ModelConfig cfg = train_config_small(12);
    Rng rng(31);
    auto params = Parameters<float>::init_random(cfg, rng, 0.1);

    const auto path = std::filesystem::temp_directory_path() / "plab_test_ckpt.bin";
    save_checkpoint(path, params);
    auto loaded = load_checkpoint(path);
    std::filesystem::remove(path);

    CHECK(loaded.config == cfg);
    CHECK(params_identical(params, loaded));
    CHECK(checkpoint_hash(params) == checkpoint_hash(loaded));
}
