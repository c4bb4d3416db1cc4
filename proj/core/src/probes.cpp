#include "plab/probes.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "plab/hash.hpp"
#include "plab/rng.hpp"

namespace plab {

ProbeDataset build_dataset(const Parameters<float>& params, const Vocab& vocab,
                           const std::vector<Template>& templates, const TaskData& tasks,
                           int subjects_per_template, uint64_t seed) {
    require(!templates.empty(), ErrorKind::data, "probe dataset needs templates");
    ProbeDataset ds;
    ds.layers = params.config.num_layers;
    ds.feature_dim = params.config.ff_dim;

    struct Row {
        const Template* tmpl;
        const Triplet* triplet;
    };
    std::vector<Row> rows;
    for (const auto& tmpl : templates) {
        const RelationTask& task = tasks.relation(tmpl.relation_id);
        std::vector<const Triplet*> pool;
        for (const auto& tr : task.test) {
            pool.push_back(&tr);
        }
        require(!pool.empty(), ErrorKind::data,
                "probe dataset: no subjects for relation " + tmpl.relation_id);
        Rng rng(derive_seed(seed, "probe_subjects/" + tmpl.id));
        rng.shuffle(pool);
        size_t take = size_t(subjects_per_template);
        if (pool.size() < take) {
            ds.warnings.push_back("relation " + tmpl.relation_id + " has only " +
                                  std::to_string(pool.size()) + " subjects, requested " +
                                  std::to_string(subjects_per_template));
            take = pool.size();
        }
        for (size_t i = 0; i < take; ++i) {
            rows.push_back(Row{&tmpl, pool[i]});
        }
    }

    ds.features_per_layer.assign(size_t(ds.layers), Mat<float>(int(rows.size()), ds.feature_dim));
    Workspace<float> ws;
    for (size_t ri = 0; ri < rows.size(); ++ri) {
        const auto& [tmpl, triplet] = rows[ri];
        MixedSequence seq;
        seq.push_token(vocab.bos_id());
        MixedSequence inst = instantiate(*tmpl, triplet->subject, vocab);
        for (auto& e : inst.elems) {
            seq.elems.push_back(std::move(e));
        }
        forward_ws(params, seq, ws);
        const int last = seq.length() - 1;
        for (int l = 0; l < ds.layers; ++l) {
            const float* u = ws.layers[size_t(l)].units.row(last);
            std::copy(u, u + ds.feature_dim, ds.features_per_layer[size_t(l)].row(int(ri)));
        }
        ds.labels.push_back(tmpl->type);
        ds.task_ids.push_back(tmpl->relation_id);
        ds.template_ids.push_back(tmpl->id);
    }
    return ds;
}

void PartitionPlan::validate() const {
    require(!partitions.empty(), ErrorKind::config, "partition plan is empty");
    std::set<std::string> seen_test;
    for (const auto& p : partitions) {
        std::set<std::string> train(p.train_tasks.begin(), p.train_tasks.end());
        for (const auto& t : p.test_tasks) {
            require(train.count(t) == 0, ErrorKind::config,
                    "task in both train and test of one partition: " + t);
            require(seen_test.insert(t).second, ErrorKind::config,
                    "test task repeats across partitions: " + t);
        }
        require(!p.train_tasks.empty() && !p.test_tasks.empty(), ErrorKind::config,
                "partition needs both train and test tasks");
    }
}

PartitionPlan make_partition_plan(std::vector<std::string> task_ids, int n_partitions,
                                  uint64_t seed) {
    std::sort(task_ids.begin(), task_ids.end());
    require(int(task_ids.size()) >= n_partitions && n_partitions >= 2, ErrorKind::config,
            "partition plan needs at least one test task per partition");
    Rng rng(derive_seed(seed, "partition_plan"));
    rng.shuffle(task_ids);

    PartitionPlan plan;
    plan.partitions.resize(size_t(n_partitions));
    // deal test tasks round-robin, train = complement
    std::vector<std::vector<std::string>> test_folds(static_cast<size_t>(n_partitions));
    for (size_t i = 0; i < task_ids.size(); ++i) {
        test_folds[i % size_t(n_partitions)].push_back(task_ids[i]);
    }
    for (int p = 0; p < n_partitions; ++p) {
        auto& part = plan.partitions[size_t(p)];
        part.test_tasks = test_folds[size_t(p)];
        std::set<std::string> test(part.test_tasks.begin(), part.test_tasks.end());
        for (const auto& id : task_ids) {
            if (test.count(id) == 0) {
                part.train_tasks.push_back(id);
            }
        }
        std::sort(part.train_tasks.begin(), part.train_tasks.end());
        std::sort(part.test_tasks.begin(), part.test_tasks.end());
    }
    plan.validate();
    return plan;
}

double LinearProbe::score(const float* x) const {
    double s = bias;
    for (size_t i = 0; i < weights.size(); ++i) {
        s += weights[i] * double(x[i]);
    }
    return s;
}

LinearProbe train_probe(const Mat<float>& features, const std::vector<int>& labels, double alpha,
                        uint64_t seed, int epochs, double learning_rate) {
    require(features.rows == int(labels.size()), ErrorKind::shape,
            "probe training: feature/label size mismatch");
    require(features.rows > 0, ErrorKind::data, "probe training: empty dataset");
    bool has_pos = false, has_neg = false;
    for (int y : labels) {
        require(y == 1 || y == -1, ErrorKind::data, "probe labels must be +/-1");
        has_pos = has_pos || y == 1;
        has_neg = has_neg || y == -1;
    }
    require(has_pos && has_neg, ErrorKind::data, "probe training: single-class data");

    LinearProbe probe;
    probe.weights.assign(size_t(features.cols), 0.0);

    Rng rng(seed);
    std::vector<int> order(features.rows);
    for (int i = 0; i < features.rows; ++i) {
        order[size_t(i)] = i;
    }

    const double total_steps = double(epochs) * double(features.rows);
    double step_count = 0.0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (int idx : order) {
            // inverse-scaled step size over the fixed epoch budget
            const double lr = learning_rate / (1.0 + 9.0 * step_count / total_steps);
            step_count += 1.0;

            const float* x = features.row(idx);
            const double y = double(labels[size_t(idx)]);
            const double z = probe.score(x);
            // d/dz log(1 + exp(-y z)) = -y sigmoid(-y z)
            const double margin = y * z;
            const double sig = 1.0 / (1.0 + std::exp(margin));
            const double g = -y * sig;

            for (size_t i = 0; i < probe.weights.size(); ++i) {
                double w = probe.weights[i] - lr * g * double(x[i]);
                // proximal L1 step: soft threshold toward zero
                const double shrink = lr * alpha;
                if (w > shrink) {
                    w -= shrink;
                } else if (w < -shrink) {
                    w += shrink;
                } else {
                    w = 0.0;
                }
                probe.weights[i] = w;
            }
            probe.bias -= lr * g; // bias unregularized
        }
    }

    size_t zeros = 0;
    for (double w : probe.weights) {
        zeros += std::abs(w) < 1e-8;
    }
    probe.sparsity = double(zeros) / double(probe.weights.size());
    return probe;
}

double evaluate_probe(const LinearProbe& probe, const Mat<float>& features,
                      const std::vector<int>& labels, uint64_t seed) {
    require(features.rows == int(labels.size()), ErrorKind::shape,
            "probe evaluation: feature/label size mismatch");
    std::vector<int> pos, neg;
    for (int i = 0; i < features.rows; ++i) {
        (labels[size_t(i)] == 1 ? pos : neg).push_back(i);
    }
    require(!pos.empty() && !neg.empty(), ErrorKind::data,
            "probe evaluation: both classes must be present");

    Rng rng(seed);
    rng.shuffle(pos);
    rng.shuffle(neg);
    const size_t n = std::min(pos.size(), neg.size());
    pos.resize(n);
    neg.resize(n);

    size_t correct = 0;
    for (int i : pos) {
        correct += probe.score(features.row(i)) >= 0.0;
    }
    for (int i : neg) {
        correct += probe.score(features.row(i)) < 0.0;
    }
    return double(correct) / double(2 * n);
}

std::vector<ProbeResult> run_probe_pair(const ProbeDataset& dataset, const PartitionPlan& plan,
                                        PromptType type_a, PromptType type_b,
                                        const ProbeConfig& config, uint64_t root_seed) {
    const std::string pair_name =
        std::string(prompt_type_name(type_a)) + "_vs_" + prompt_type_name(type_b);

    std::vector<ProbeResult> results;
    for (int layer = 0; layer < dataset.layers; ++layer) {
        std::vector<double> accs, sparsities;
        for (size_t pi = 0; pi < plan.partitions.size(); ++pi) {
            const auto& part = plan.partitions[pi];
            std::set<std::string> train_tasks(part.train_tasks.begin(), part.train_tasks.end());
            std::set<std::string> test_tasks(part.test_tasks.begin(), part.test_tasks.end());

            // collect instances of the two classes for this layer
            std::vector<int> train_rows, test_rows;
            for (size_t i = 0; i < dataset.size(); ++i) {
                if (dataset.labels[i] != type_a && dataset.labels[i] != type_b) {
                    continue;
                }
                if (train_tasks.count(dataset.task_ids[i])) {
                    train_rows.push_back(int(i));
                } else if (test_tasks.count(dataset.task_ids[i])) {
                    test_rows.push_back(int(i));
                }
            }
            require(!train_rows.empty() && !test_rows.empty(), ErrorKind::data,
                    "probe partition has empty train or test instances");

            const Mat<float>& all = dataset.features_per_layer[size_t(layer)];

            // per-feature standardization fitted on the training split; the
            // features stay the raw unit values, this only conditions the
            // SGD fit
            std::vector<double> mean(size_t(dataset.feature_dim), 0.0);
            std::vector<double> scale(size_t(dataset.feature_dim), 1.0);
            for (int row : train_rows) {
                for (int f = 0; f < dataset.feature_dim; ++f) {
                    mean[size_t(f)] += double(all.at(row, f));
                }
            }
            for (auto& m : mean) {
                m /= double(train_rows.size());
            }
            std::vector<double> var(size_t(dataset.feature_dim), 0.0);
            for (int row : train_rows) {
                for (int f = 0; f < dataset.feature_dim; ++f) {
                    const double d = double(all.at(row, f)) - mean[size_t(f)];
                    var[size_t(f)] += d * d;
                }
            }
            for (int f = 0; f < dataset.feature_dim; ++f) {
                const double sd = std::sqrt(var[size_t(f)] / double(train_rows.size()));
                scale[size_t(f)] = sd > 1e-8 ? sd : 1.0;
            }

            auto gather = [&](const std::vector<int>& rows, Mat<float>& x, std::vector<int>& y) {
                x = Mat<float>(int(rows.size()), dataset.feature_dim);
                y.clear();
                for (size_t r = 0; r < rows.size(); ++r) {
                    for (int f = 0; f < dataset.feature_dim; ++f) {
                        x.at(int(r), f) = float((double(all.at(rows[r], f)) - mean[size_t(f)]) /
                                                scale[size_t(f)]);
                    }
                    y.push_back(dataset.labels[size_t(rows[r])] == type_a ? 1 : -1);
                }
            };
            Mat<float> train_x, test_x;
            std::vector<int> train_y, test_y;
            gather(train_rows, train_x, train_y);
            gather(test_rows, test_x, test_y);

            for (int s = 0; s < config.seeds; ++s) {
                const uint64_t run_seed = derive_seed(
                    root_seed, "probe/" + pair_name + "/layer" + std::to_string(layer) + "/p" +
                                   std::to_string(pi) + "/s" + std::to_string(s));
                LinearProbe probe = train_probe(train_x, train_y, config.alpha, run_seed,
                                                config.epochs, config.learning_rate);
                accs.push_back(evaluate_probe(probe, test_x, test_y, run_seed));
                sparsities.push_back(probe.sparsity);
            }
        }

        ProbeResult res;
        res.layer = layer;
        res.pair = pair_name;
        res.runs = int(accs.size());
        double mean = 0.0;
        for (double a : accs) {
            mean += a;
        }
        mean /= double(accs.size());
        double var = 0.0;
        for (double a : accs) {
            var += (a - mean) * (a - mean);
        }
        res.mean_accuracy = mean;
        res.std_accuracy = std::sqrt(var / double(accs.size()));
        double sp = 0.0;
        for (double s : sparsities) {
            sp += s;
        }
        res.mean_sparsity = sp / double(sparsities.size());
        results.push_back(std::move(res));
    }
    return results;
}

std::vector<ProbeResult> run_probe_suite(const ProbeDataset& dataset, const PartitionPlan& plan,
                                         const ProbeConfig& config, uint64_t root_seed) {
    std::vector<ProbeResult> all;
    const std::pair<PromptType, PromptType> pairs[] = {
        {PromptType::human, PromptType::m_disc},
        {PromptType::human, PromptType::m_cont},
        {PromptType::m_disc, PromptType::m_cont},
    };
    for (const auto& [a, b] : pairs) {
        auto res = run_probe_pair(dataset, plan, a, b, config, root_seed);
        all.insert(all.end(), res.begin(), res.end());
    }
    return all;
}

} // namespace plab
