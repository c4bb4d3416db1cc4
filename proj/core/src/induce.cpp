#include "plab/induce.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "plab/hash.hpp"

namespace plab {

namespace {

struct BatchItem {
    std::vector<int> subject_ids;
    int object_id = 0;
};

std::vector<BatchItem> encode_triplets(const Vocab& vocab, const std::vector<Triplet>& triplets) {
    std::vector<BatchItem> out;
    out.reserve(triplets.size());
    for (const auto& t : triplets) {
        BatchItem item;
        item.subject_ids = vocab.encode_line(t.subject);
        require(!item.subject_ids.empty(), ErrorKind::vocab,
                "induce: subject tokenizes to nothing: " + t.subject);
        item.object_id = vocab.id(t.object);
        out.push_back(std::move(item));
    }
    return out;
}

MixedSequence build_disc_sequence(int bos_id, const BatchItem& item,
                                  const std::vector<int>& payload) {
    MixedSequence seq;
    seq.push_token(bos_id);
    for (int id : item.subject_ids) {
        seq.push_token(id);
    }
    for (int id : payload) {
        seq.push_token(id);
    }
    return seq;
}

MixedSequence build_cont_sequence(int bos_id, const BatchItem& item, const Mat<float>& vectors) {
    MixedSequence seq;
    seq.push_token(bos_id);
    for (int id : item.subject_ids) {
        seq.push_token(id);
    }
    for (int r = 0; r < vectors.rows; ++r) {
        std::vector<double> v(vectors.row(r), vectors.row(r) + vectors.cols);
        seq.push_vector(std::move(v));
    }
    return seq;
}

// cycling minibatch sampler over a seeded shuffle of the training split
struct BatchSampler {
    std::vector<size_t> order;
    size_t cursor = 0;
    Rng* rng;

    BatchSampler(size_t n, Rng& r) : rng(&r) {
        order.resize(n);
        for (size_t i = 0; i < n; ++i) {
            order[i] = i;
        }
        rng->shuffle(order);
    }

    std::vector<size_t> next(size_t batch_size) {
        std::vector<size_t> out;
        for (size_t k = 0; k < batch_size; ++k) {
            if (cursor >= order.size()) {
                rng->shuffle(order);
                cursor = 0;
            }
            out.push_back(order[cursor++]);
        }
        return out;
    }
};

double batch_loss_disc(const Parameters<float>& params, int bos_id,
                       const std::vector<BatchItem>& items, const std::vector<size_t>& batch,
                       const std::vector<int>& payload) {
    double total = 0.0;
    for (size_t bi : batch) {
        const MixedSequence seq = build_disc_sequence(bos_id, items[bi], payload);
        LossSpec spec{LossMode::nll, seq.length() - 1, items[bi].object_id};
        total += double(loss_value(params, seq, spec));
    }
    return total / double(batch.size());
}

} // namespace

double discrete_batch_loss(const Parameters<float>& params, const Vocab& vocab,
                           const std::vector<Triplet>& batch, const std::vector<int>& payload_ids) {
    require(!batch.empty(), ErrorKind::data, "induce: empty batch");
    auto items = encode_triplets(vocab, batch);
    std::vector<size_t> all(items.size());
    for (size_t i = 0; i < all.size(); ++i) {
        all[i] = i;
    }
    return batch_loss_disc(params, vocab.bos_id(), items, all, payload_ids);
}

Template autoprompt_search(const Parameters<float>& params, const Vocab& vocab,
                           const RelationTask& task, const InduceConfig& config, uint64_t seed) {
    const ModelConfig& cfg = params.config;
    config.validate(cfg.vocab_size);
    require(!task.train.empty(), ErrorKind::data,
            "induce: empty training split for task " + task.relation_id);

    Rng rng(derive_seed(seed, "autoprompt/" + task.relation_id));
    auto items = encode_triplets(vocab, task.train);
    BatchSampler sampler(items.size(), rng);

    std::vector<int> payload(size_t(config.template_len), vocab.fill_id());
    const int pos_offset = rng.index(size_t(config.template_len));

    for (int step = 0; step < config.disc_steps; ++step) {
        const int pos = (pos_offset + step) % config.template_len;
        const auto batch = sampler.next(size_t(config.batch_size));

        // mean gradient at the trigger position's input embedding
        std::vector<double> grad(size_t(cfg.model_dim), 0.0);
        for (size_t bi : batch) {
            const MixedSequence seq = build_disc_sequence(vocab.bos_id(), items[bi], payload);
            const int seq_pos = 1 + int(items[bi].subject_ids.size()) + pos;
            LossSpec spec{LossMode::nll, seq.length() - 1, items[bi].object_id};
            auto res = loss_and_gradients(params, seq, spec);
            for (int i = 0; i < cfg.model_dim; ++i) {
                grad[size_t(i)] += double(res.grads.grad_input.at(seq_pos, i));
            }
        }

        // first-order score for every vocabulary item: e_w . (-g)
        std::vector<std::pair<double, int>> scored(size_t(cfg.vocab_size));
        for (int w = 0; w < cfg.vocab_size; ++w) {
            const float* e = params.tok_emb.row(w);
            double s = 0.0;
            for (int i = 0; i < cfg.model_dim; ++i) {
                s -= double(e[i]) * grad[size_t(i)];
            }
            scored[size_t(w)] = {s, w};
        }
        const size_t pool = size_t(std::min(config.candidate_pool, cfg.vocab_size));
        std::partial_sort(scored.begin(), scored.begin() + long(pool), scored.end(),
                          [](const auto& a, const auto& b) {
                              if (a.first != b.first) {
                                  return a.first > b.first;
                              }
                              return a.second < b.second;
                          });

        // true batch loss of the current token and each candidate
        const double current_loss = batch_loss_disc(params, vocab.bos_id(), items, batch, payload);
        double best_loss = current_loss;
        int best_token = payload[size_t(pos)];
        std::vector<int> trial = payload;
        for (size_t k = 0; k < pool; ++k) {
            const int cand = scored[k].second;
            if (cand == payload[size_t(pos)]) {
                continue;
            }
            trial[size_t(pos)] = cand;
            const double cand_loss = batch_loss_disc(params, vocab.bos_id(), items, batch, trial);
            // strict improvement only; loss ties keep the incumbent
            if (cand_loss < best_loss) {
                best_loss = cand_loss;
                best_token = cand;
            }
        }
        payload[size_t(pos)] = best_token;
    }

    Template out;
    out.id = task.relation_id + ":m_disc:s" + std::to_string(seed);
    out.relation_id = task.relation_id;
    out.type = PromptType::m_disc;
    for (int id : payload) {
        out.payload_tokens.push_back(vocab.token(id));
    }
    out.method = "gradient_guided_search";
    out.seed = seed;
    out.steps = config.disc_steps;
    return out;
}

Template optiprompt_optimize(const Parameters<float>& params, const Vocab& vocab,
                             const RelationTask& task, const InduceConfig& config, uint64_t seed) {
    const ModelConfig& cfg = params.config;
    config.validate(cfg.vocab_size);
    require(!task.train.empty(), ErrorKind::data,
            "induce: empty training split for task " + task.relation_id);

    Rng rng(derive_seed(seed, "optiprompt/" + task.relation_id));
    auto items = encode_triplets(vocab, task.train);
    BatchSampler sampler(items.size(), rng);

    const int n = config.template_len;
    const int d = cfg.model_dim;

    // per-dimension mean/std of the embedding table keeps the vectors on the
    // embedding manifold scale
    std::vector<double> mean(size_t(d), 0.0), stdev(size_t(d), 0.0);
    for (int w = 0; w < cfg.vocab_size; ++w) {
        const float* e = params.tok_emb.row(w);
        for (int i = 0; i < d; ++i) {
            mean[size_t(i)] += double(e[i]);
        }
    }
    for (auto& m : mean) {
        m /= double(cfg.vocab_size);
    }
    for (int w = 0; w < cfg.vocab_size; ++w) {
        const float* e = params.tok_emb.row(w);
        for (int i = 0; i < d; ++i) {
            const double c = double(e[i]) - mean[size_t(i)];
            stdev[size_t(i)] += c * c;
        }
    }
    for (auto& s : stdev) {
        s = std::sqrt(s / double(cfg.vocab_size));
    }

    Mat<float> vectors(n, d);
    for (int r = 0; r < n; ++r) {
        for (int i = 0; i < d; ++i) {
            vectors.at(r, i) = float(mean[size_t(i)] + stdev[size_t(i)] * rng.gauss());
        }
    }

    Mat<float> best_vectors = vectors;
    double best_loss = std::numeric_limits<double>::infinity();

    Mat<float> grad(n, d);
    for (int step = 0; step <= config.cont_steps; ++step) {
        const auto batch = sampler.next(size_t(config.batch_size));
        grad.fill(0.0f);
        double loss = 0.0;
        for (size_t bi : batch) {
            const MixedSequence seq = build_cont_sequence(vocab.bos_id(), items[bi], vectors);
            const int payload_start = 1 + int(items[bi].subject_ids.size());
            LossSpec spec{LossMode::nll, seq.length() - 1, items[bi].object_id};
            auto res = loss_and_gradients(params, seq, spec);
            loss += double(res.value);
            for (int r = 0; r < n; ++r) {
                const float* g = res.grads.grad_input.row(payload_start + r);
                float* acc = grad.row(r);
                for (int i = 0; i < d; ++i) {
                    acc[i] += g[i];
                }
            }
        }
        loss /= double(batch.size());
        require(std::isfinite(loss), ErrorKind::optimization,
                "optiprompt diverged at step " + std::to_string(step) + " for task " +
                    task.relation_id);

        if (loss < best_loss) {
            best_loss = loss;
            best_vectors = vectors;
        }
        if (step == config.cont_steps) {
            break; // final iterate evaluated, no further update
        }

        const float scale = float(config.cont_learning_rate / double(batch.size()));
        for (size_t i = 0; i < vectors.data.size(); ++i) {
            vectors.data[i] -= scale * grad.data[i];
        }
    }

    Template out;
    out.id = task.relation_id + ":m_cont:s" + std::to_string(seed);
    out.relation_id = task.relation_id;
    out.type = PromptType::m_cont;
    out.payload_vectors = best_vectors;
    out.method = "embedding_space_descent";
    out.seed = seed;
    out.steps = config.cont_steps;
    return out;
}

double majority_class_frequency(const std::vector<Triplet>& triplets) {
    require(!triplets.empty(), ErrorKind::data, "majority frequency of an empty triplet set");
    std::map<std::string, int> counts;
    for (const auto& t : triplets) {
        counts[t.object] += 1;
    }
    int best = 0;
    for (const auto& [obj, n] : counts) {
        best = std::max(best, n);
    }
    return double(best) / double(triplets.size());
}

double template_accuracy(const Parameters<float>& params, const Vocab& vocab, const Template& tmpl,
                         const std::vector<Triplet>& triplets) {
    Workspace<float> ws;
    int correct = 0;
    int total = 0;
    for (const auto& tr : triplets) {
        if (tr.relation_id != tmpl.relation_id) {
            continue;
        }
        MixedSequence seq;
        seq.push_token(vocab.bos_id());
        MixedSequence inst = instantiate(tmpl, tr.subject, vocab);
        for (auto& e : inst.elems) {
            seq.elems.push_back(std::move(e));
        }
        forward_ws(params, seq, ws, static_cast<const UnitDelta<float>*>(nullptr),
                   seq.length() - 1);
        const int pred = argmax_lowest(ws.logits.row(seq.length() - 1), params.config.vocab_size);
        correct += vocab.token(pred) == tr.object;
        ++total;
    }
    return total == 0 ? 0.0 : double(correct) / double(total);
}

ControlReport random_init_control(const ModelConfig& model_config, double weight_init_std,
                                  const Vocab& vocab, const TaskData& tasks,
                                  const InduceConfig& config, uint64_t root_seed) {
    ControlReport report;
    for (int ms = 0; ms < config.control_model_seeds; ++ms) {
        const uint64_t model_seed = derive_seed(root_seed, "control/model/" + std::to_string(ms));
        Rng rng(model_seed);
        const auto params = Parameters<float>::init_random(model_config, rng, weight_init_std);

        for (const auto& task : tasks.relations) {
            const uint64_t job_seed =
                derive_seed(root_seed, "control/" + std::to_string(ms) + "/" + task.relation_id);

            Template disc = autoprompt_search(params, vocab, task, config, job_seed);
            Template cont = optiprompt_optimize(params, vocab, task, config, job_seed);

            const double majority = majority_class_frequency(task.test);
            report.rows.push_back(ControlRow{model_seed, task.relation_id, "m_disc",
                                             template_accuracy(params, vocab, disc, task.test),
                                             majority, int(task.test.size())});
            report.rows.push_back(ControlRow{model_seed, task.relation_id, "m_cont",
                                             template_accuracy(params, vocab, cont, task.test),
                                             majority, int(task.test.size())});
        }
    }
    return report;
}

} // namespace plab
