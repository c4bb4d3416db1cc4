#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "plab/model.hpp"
#include "plab/vocab.hpp"

namespace plab {

struct TrainConfig {
    int max_steps = 3000;
    int batch_size = 16;
    double learning_rate = 3e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.98;
    double adam_eps = 1e-8;
    double weight_init_std = 0.05;
    double grad_clip = 1.0; // global-norm clip; <= 0 disables
    int eval_every = 0;     // 0 disables the early-stop callback
};

struct TrainResult {
    Parameters<float> params;
    std::vector<double> step_losses;
    int steps_run = 0;
};

// Optional early-stop probe: called every eval_every steps with the current
// parameters; returning true stops training.
using StopProbe = std::function<bool(const Parameters<float>&, int step)>;

// Adam training over a corpus of pre-tokenized lines. Each batch item is one
// line with a BOS prepended; the loss is the mean next-token NLL over every
// position of every item. Deterministic for a fixed seed: initialization,
// batch order and update order all come from one seeded stream.
TrainResult train(const std::vector<std::vector<int>>& corpus_lines, const ModelConfig& config,
                  const TrainConfig& train_config, uint64_t seed, int bos_id,
                  const StopProbe& stop_probe = nullptr);

// Mean NLL of the model over a fixed sample of corpus lines (diagnostic).
double corpus_mean_nll(const Parameters<float>& params, const std::vector<std::vector<int>>& lines,
                       int bos_id, size_t max_lines = 256);

} // namespace plab
