#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "plab/tasks.hpp"

namespace plab {

// Diagnostic classifiers: per-layer sparse logistic regression separating
// prompt types from knowledge-neuron activations under task-disjoint splits.

struct ProbeDataset {
    int layers = 0;
    int feature_dim = 0;                       // d_m
    std::vector<Mat<float>> features_per_layer; // [layer], instances x d_m
    std::vector<PromptType> labels;
    std::vector<std::string> task_ids;
    std::vector<std::string> template_ids;
    std::vector<std::string> warnings;

    size_t size() const { return labels.size(); }
};

// Features: each layer's raw unit-activation vector at the prediction
// position, for subjects_per_template seeded subject draws per template.
ProbeDataset build_dataset(const Parameters<float>& params, const Vocab& vocab,
                           const std::vector<Template>& templates, const TaskData& tasks,
                           int subjects_per_template = 10, uint64_t seed = 0);

struct PartitionPlan {
    struct Partition {
        std::vector<std::string> train_tasks;
        std::vector<std::string> test_tasks;
    };
    std::vector<Partition> partitions;

    // train/test disjoint inside each partition; test sets pairwise disjoint
    void validate() const;
};

PartitionPlan make_partition_plan(std::vector<std::string> task_ids, int n_partitions = 4,
                                  uint64_t seed = 0);

struct ProbeConfig {
    double alpha = 0.01; // L1 coefficient
    int epochs = 40;
    double learning_rate = 0.05;
    int seeds = 5;
    int subjects_per_template = 10;
    int partitions = 4;
};

struct LinearProbe {
    std::vector<double> weights;
    double bias = 0.0;
    double sparsity = 0.0; // fraction of |w| < 1e-8

    double score(const float* x) const;
};

// L1-regularized logistic regression fitted with proximal stochastic gradient
// descent (soft-threshold after every sample step, inverse-scaled step size).
LinearProbe train_probe(const Mat<float>& features, const std::vector<int>& labels, double alpha,
                        uint64_t seed, int epochs = 40, double learning_rate = 0.05);

// Accuracy on a class-balanced test set: the larger class is downsampled
// (seeded) to exact balance before scoring.
double evaluate_probe(const LinearProbe& probe, const Mat<float>& features,
                      const std::vector<int>& labels, uint64_t seed);

struct ProbeResult {
    int layer = 0;
    std::string pair; // e.g. "human_vs_m_cont"
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    double mean_sparsity = 0.0;
    int runs = 0;
};

// partitions x seeds runs per layer for one pairwise prompt-type task
std::vector<ProbeResult> run_probe_pair(const ProbeDataset& dataset, const PartitionPlan& plan,
                                        PromptType type_a, PromptType type_b,
                                        const ProbeConfig& config, uint64_t root_seed);

std::vector<ProbeResult> run_probe_suite(const ProbeDataset& dataset, const PartitionPlan& plan,
                                         const ProbeConfig& config, uint64_t root_seed);

} // namespace plab
