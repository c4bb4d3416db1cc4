#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "plab/mat.hpp"
#include "plab/model.hpp"
#include "plab/vocab.hpp"

namespace plab {

enum class PromptType { human, m_disc, m_cont };

inline const char* prompt_type_name(PromptType t) {
    switch (t) {
        case PromptType::human: return "human";
        case PromptType::m_disc: return "m_disc";
        case PromptType::m_cont: return "m_cont";
    }
    return "?";
}

PromptType prompt_type_from_name(const std::string& name);

constexpr PromptType kAllPromptTypes[] = {PromptType::human, PromptType::m_disc,
                                          PromptType::m_cont};

// One knowledge triplet: relation(subject) = object, object a single token.
struct Triplet {
    std::string relation_id;
    std::string subject;
    std::string object;

    bool operator==(const Triplet&) const = default;
};

// A concrete prompt for one relation. Discrete payloads are token strings;
// continuous payloads are N x d embedding-space vectors.
struct Template {
    std::string id;
    std::string relation_id;
    PromptType type = PromptType::human;
    std::vector<std::string> payload_tokens; // human / m_disc
    Mat<float> payload_vectors;              // m_cont
    std::string method;                      // provenance
    uint64_t seed = 0;
    int steps = 0;

    int payload_length() const {
        return type == PromptType::m_cont ? payload_vectors.rows : int(payload_tokens.size());
    }

    // machine templates must carry exactly N payload positions
    void validate(int machine_template_len) const;
};

// Per-relation triplet data with a train split (prompt induction) and a test
// split (every evaluation).
struct RelationTask {
    std::string relation_id;
    std::vector<Triplet> train;
    std::vector<Triplet> test;
};

struct TaskData {
    std::vector<RelationTask> relations; // sorted by relation_id

    const RelationTask& relation(const std::string& id) const;
    std::vector<std::string> relation_ids() const;
};

// "[subject] [template]" as a model input; the prediction position is the
// last element. No BOS here; evaluation harnesses prepend it.
MixedSequence instantiate(const Template& tmpl, const std::string& subject, const Vocab& vocab);

// ---------------------------------------------------------------------------
// Accuracy filtering (> threshold, strict). A task is retained only when all
// three prompt types keep at least one template; template accuracy is
// supplied by the caller (diagnostics::template_accuracy in the pipeline).
// ---------------------------------------------------------------------------

struct FilterResult {
    std::vector<Template> retained;
    std::map<std::string, std::map<PromptType, int>> per_task_counts; // retained tasks only
    std::map<PromptType, double> avg_templates_per_task;
    std::vector<std::string> retained_task_ids;
};

using AccuracyFn = std::function<double(const Template&)>;

FilterResult filter_templates(const std::vector<Template>& templates, const AccuracyFn& accuracy,
                              double threshold = 0.10);

// ---------------------------------------------------------------------------
// File formats (also the import path for LAMA-style data)
//   triplets:  relation_id <TAB> subject <TAB> object
//   templates: id <TAB> relation_id <TAB> type <TAB> payload <TAB> method
//              <TAB> seed <TAB> steps
//   where payload is a space-joined token list, or for m_cont a path to a
//   vector file relative to the template file's directory.
// ---------------------------------------------------------------------------

void write_triplets(const std::filesystem::path& path, const std::vector<Triplet>& triplets);
std::vector<Triplet> read_triplets(const std::filesystem::path& path);

void write_templates(const std::filesystem::path& path, const std::vector<Template>& templates);
std::vector<Template> read_templates(const std::filesystem::path& path);

TaskData task_data_from_files(const std::filesystem::path& train_path,
                              const std::filesystem::path& test_path);

} // namespace plab
