#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plab/tasks.hpp"
#include "plab/train.hpp"

namespace plab {

// Machine prompt generation: gradient-guided search over the discrete
// vocabulary, and direct optimization of continuous embedding vectors, plus
// the untrained-model control.

struct InduceConfig {
    int template_len = 5;           // N, fixed machine template length
    int disc_steps = 40;            // position-update attempts (round-robin)
    int cont_steps = 200;           // gradient-descent steps
    int candidate_pool = 32;        // c, candidates re-scored by true loss
    int batch_size = 24;            // triplets per induction batch
    double cont_learning_rate = 0.5;
    int num_seeds = 10;             // templates per (task, method)
    int control_model_seeds = 3;    // untrained models for the control
    std::string method = "both";    // both | disc | cont
    std::string only_task;          // restrict induction to one relation id

    void validate(int vocab_size) const {
        require(template_len >= 1, ErrorKind::config, "induce: template_len must be >= 1");
        require(candidate_pool >= 1 && candidate_pool <= vocab_size, ErrorKind::config,
                "induce: candidate_pool must be in [1, vocab_size]");
        require(batch_size >= 1, ErrorKind::config, "induce: batch_size must be >= 1");
        require(disc_steps >= 0 && cont_steps >= 0, ErrorKind::config,
                "induce: step counts must be >= 0");
        require(method == "both" || method == "disc" || method == "cont", ErrorKind::config,
                "induce: method must be both, disc or cont");
    }
};

// Discrete search. Every position starts at the neutral filler token; each
// step picks one trigger position round-robin (with a seeded starting
// offset), ranks the vocabulary by the first-order loss decrease
// e_w . (-grad), re-scores the top-c candidates by true batch loss, and
// accepts only a strict improvement (ties keep the current token).
Template autoprompt_search(const Parameters<float>& params, const Vocab& vocab,
                           const RelationTask& task, const InduceConfig& config, uint64_t seed);

// Continuous optimization. N vectors initialized from the embedding-table
// per-dimension statistics, plain gradient descent on batch NLL, best iterate
// returned; the recorded best-so-far loss is non-increasing.
Template optiprompt_optimize(const Parameters<float>& params, const Vocab& vocab,
                             const RelationTask& task, const InduceConfig& config, uint64_t seed);

// mean batch NLL of the gold object for a discrete payload (exposed for the
// brute-force sweep oracle in the tests)
double discrete_batch_loss(const Parameters<float>& params, const Vocab& vocab,
                           const std::vector<Triplet>& batch, const std::vector<int>& payload_ids);

struct ControlRow {
    uint64_t model_seed = 0;
    std::string relation_id;
    std::string method; // "m_disc" | "m_cont"
    double accuracy = 0.0;
    double majority_class_freq = 0.0;
    int n_eval = 0;
};

struct ControlReport {
    std::vector<ControlRow> rows;
};

// Runs both induction methods against freshly initialized, untrained models
// (control_model_seeds of them) with the same hyperparameters, and reports
// test accuracy next to the majority-class frequency per relation.
ControlReport random_init_control(const ModelConfig& model_config, double weight_init_std,
                                  const Vocab& vocab, const TaskData& tasks,
                                  const InduceConfig& config, uint64_t root_seed);

double majority_class_frequency(const std::vector<Triplet>& triplets);

// argmax prediction accuracy of one template over triplets (BOS-prefixed,
// lowest-id tie-break)
double template_accuracy(const Parameters<float>& params, const Vocab& vocab, const Template& tmpl,
                         const std::vector<Triplet>& triplets);

} // namespace plab
