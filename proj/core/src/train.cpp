#include "plab/train.hpp"

#include <algorithm>
#include <cmath>

#include "plab/rng.hpp"

namespace plab {

namespace {

struct Adam {
    Parameters<float> m;
    Parameters<float> v;
    double beta1, beta2, eps;
    int step = 0;

    Adam(const ModelConfig& cfg, const TrainConfig& tc)
        : m(Parameters<float>::zeros(cfg)), v(Parameters<float>::zeros(cfg)), beta1(tc.adam_beta1),
          beta2(tc.adam_beta2), eps(tc.adam_eps) {}

    void update(Parameters<float>& params, const Parameters<float>& grads, double lr) {
        ++step;
        const double bc1 = 1.0 - std::pow(beta1, double(step));
        const double bc2 = 1.0 - std::pow(beta2, double(step));

        auto* mp = &m;
        auto* vp = &v;
        auto* gp = const_cast<Parameters<float>*>(&grads);

        // walk all four parameter sets in lockstep via the flat tensor order
        std::vector<Mat<float>*> pt, mt, vt, gt;
        for_each_tensor(params, [&](const char*, Mat<float>& t) { pt.push_back(&t); });
        for_each_tensor(*mp, [&](const char*, Mat<float>& t) { mt.push_back(&t); });
        for_each_tensor(*vp, [&](const char*, Mat<float>& t) { vt.push_back(&t); });
        for_each_tensor(*gp, [&](const char*, Mat<float>& t) { gt.push_back(&t); });

        for (size_t ti = 0; ti < pt.size(); ++ti) {
            float* p = pt[ti]->data.data();
            float* mm = mt[ti]->data.data();
            float* vv = vt[ti]->data.data();
            const float* g = gt[ti]->data.data();
            const size_t n = pt[ti]->size();
            for (size_t i = 0; i < n; ++i) {
                mm[i] = float(beta1 * mm[i] + (1.0 - beta1) * g[i]);
                vv[i] = float(beta2 * vv[i] + (1.0 - beta2) * double(g[i]) * double(g[i]));
                const double mhat = mm[i] / bc1;
                const double vhat = vv[i] / bc2;
                p[i] -= float(lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }
};

double grad_global_norm(const Parameters<float>& grads) {
    double sumsq = 0.0;
    for_each_tensor(grads, [&](const char*, const Mat<float>& m) {
        for (float g : m.data) {
            sumsq += double(g) * double(g);
        }
    });
    return std::sqrt(sumsq);
}

void scale_grads(Parameters<float>& grads, float s) {
    for_each_tensor(grads, [&](const char*, Mat<float>& m) {
        for (float& g : m.data) {
            g *= s;
        }
    });
}

} // namespace

TrainResult train(const std::vector<std::vector<int>>& corpus_lines, const ModelConfig& config,
                  const TrainConfig& train_config, uint64_t seed, int bos_id,
                  const StopProbe& stop_probe) {
    config.validate();
    require(!corpus_lines.empty(), ErrorKind::config, "train: empty corpus");
    require(bos_id >= 0 && bos_id < config.vocab_size, ErrorKind::config,
            "train: bos id outside vocabulary");

    Rng rng(seed);
    TrainResult result;
    result.params = Parameters<float>::init_random(config, rng, train_config.weight_init_std);

    if (train_config.max_steps <= 0) {
        return result;
    }

    Adam adam(config, train_config);
    GradientTrace<float> gt;
    Workspace<float> ws;

    std::vector<size_t> order(corpus_lines.size());
    for (size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    rng.shuffle(order);
    size_t cursor = 0;

    const int max_line = config.context_length - 1;

    for (int step = 0; step < train_config.max_steps; ++step) {
        // gather the batch first so the token budget is known up front
        std::vector<const std::vector<int>*> batch;
        int total_targets = 0;
        for (int b = 0; b < train_config.batch_size; ++b) {
            if (cursor >= order.size()) {
                rng.shuffle(order);
                cursor = 0;
            }
            const auto& line = corpus_lines[order[cursor++]];
            if (line.empty()) {
                continue;
            }
            batch.push_back(&line);
            total_targets += std::min(int(line.size()), max_line);
        }
        if (total_targets == 0) {
            continue;
        }

        gt.prepare(config, 2);
        gt.zero_params();
        const float inv_n = 1.0f / float(total_targets);
        double step_loss = 0.0;

        for (const auto* line_ptr : batch) {
            const auto& line = *line_ptr;
            const int n = std::min(int(line.size()), max_line);

            MixedSequence seq;
            seq.push_token(bos_id);
            for (int i = 0; i < n; ++i) {
                seq.push_token(line[size_t(i)]);
            }

            forward_ws(result.params, seq, ws);

            // targets: position t predicts line[t]
            Mat<float> dlogits(seq.length(), config.vocab_size);
            for (int t = 0; t < n; ++t) {
                std::vector<float> probs = softmax_probs(ws.logits.row(t), config.vocab_size);
                const int target = line[size_t(t)];
                step_loss += -std::log(std::max(double(probs[size_t(target)]), 1e-30));
                float* dl = dlogits.row(t);
                for (int v = 0; v < config.vocab_size; ++v) {
                    dl[v] = probs[size_t(v)] * inv_n;
                }
                dl[target] -= inv_n;
            }

            gt.prepare(config, seq.length());
            backward_ws(result.params, seq, ws, dlogits, gt);
        }

        if (train_config.grad_clip > 0.0) {
            const double norm = grad_global_norm(gt.grad_params);
            if (norm > train_config.grad_clip) {
                scale_grads(gt.grad_params, float(train_config.grad_clip / norm));
            }
        }

        adam.update(result.params, gt.grad_params, train_config.learning_rate);
        result.step_losses.push_back(step_loss / double(total_targets));
        result.steps_run = step + 1;

        if (stop_probe && train_config.eval_every > 0 && (step + 1) % train_config.eval_every == 0) {
            if (stop_probe(result.params, step + 1)) {
                break;
            }
        }
    }

    return result;
}

double corpus_mean_nll(const Parameters<float>& params, const std::vector<std::vector<int>>& lines,
                       int bos_id, size_t max_lines) {
    Workspace<float> ws;
    double total = 0.0;
    size_t count = 0;
    const size_t n_lines = std::min(lines.size(), max_lines);
    const int max_line = params.config.context_length - 1;
    for (size_t i = 0; i < n_lines; ++i) {
        const auto& line = lines[i];
        if (line.empty()) {
            continue;
        }
        const int n = std::min(int(line.size()), max_line);
        MixedSequence seq;
        seq.push_token(bos_id);
        for (int t = 0; t < n; ++t) {
            seq.push_token(line[size_t(t)]);
        }
        forward_ws(params, seq, ws);
        for (int t = 0; t < n; ++t) {
            std::vector<float> probs = softmax_probs(ws.logits.row(t), params.config.vocab_size);
            total += -std::log(std::max(double(probs[size_t(line[size_t(t)])]), 1e-30));
            ++count;
        }
    }
    return count == 0 ? 0.0 : total / double(count);
}

} // namespace plab
