#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "plab/tasks.hpp"

namespace plab {

// ---------------------------------------------------------------------------
// Per-(template, subject) evaluation record
// ---------------------------------------------------------------------------

struct EvalRecord {
    std::string template_id;
    std::string relation_id;
    PromptType type = PromptType::human;
    std::string subject;
    std::string object;
    std::string predicted;
    bool correct = false;
    double entropy_bits = 0.0;
    double entropy_nats = 0.0;
    double perplexity = std::numeric_limits<double>::quiet_NaN(); // NaN for m_cont
    double attention_spread_pct = 0.0;
    std::vector<std::vector<float>> unit_activations; // [layer][d_m] at the prediction position

    bool has_perplexity() const { return std::isfinite(perplexity); }
};

// Boolean (layer x unit) matrix of the knowledge neurons a template activates.
struct ActivationMatrix {
    std::string template_id;
    int layers = 0;
    int units_per_layer = 0;
    std::vector<uint8_t> active; // layer-major, 0/1

    size_t cells() const { return active.size(); }
    bool at(int layer, int unit) const {
        return active[size_t(layer) * size_t(units_per_layer) + size_t(unit)] != 0;
    }
    size_t count_active() const;
};

struct PairStat {
    std::string relation_id;
    std::string id_a, id_b;
    PromptType type_a = PromptType::human, type_b = PromptType::human;
    double input_similarity = 0.0;
    double output_agreement = 0.0;
    double activation_overlap = 0.0;
};

// ---------------------------------------------------------------------------
// Elementary metrics
// ---------------------------------------------------------------------------

// Shannon entropy in nats, 0 log 0 := 0. The distribution must be
// non-negative and sum to 1 within 1e-6.
double output_entropy_nats(const std::vector<double>& dist);
inline double nats_to_bits(double nats) { return nats / 0.69314718055994530942; }

// Minimal percentage of attention entries needed to reach 0.90 cumulative
// mass, for a single causal row of a given prefix length.
double attention_row_spread_pct(const double* row, int prefix_len);

// Spread averaged over rows, heads and layers of one trace.
template <typename T>
double attention_spread_percent(const ForwardTrace<T>& trace);

// exp(mean NLL) of the "[subject] [template]" token sequence conditioned on a
// prepended BOS. Discrete templates only; m_cont raises an unsupported error.
double sequence_perplexity(const Parameters<float>& params, const Vocab& vocab,
                           const Template& tmpl, const std::string& subject);

double activation_overlap(const ActivationMatrix& a, const ActivationMatrix& b);

// cosine similarity between the mean payload embeddings of two templates
double input_similarity(const Parameters<float>& params, const Vocab& vocab, const Template& a,
                        const Template& b);

// fraction of shared subjects with an identical argmax prediction
double output_agreement(const std::vector<EvalRecord>& records_a,
                        const std::vector<EvalRecord>& records_b);

// ---------------------------------------------------------------------------
// Evaluation driver
// ---------------------------------------------------------------------------

struct DiagnosticsConfig {
    double activation_k = 0.2; // App-A-style activation share threshold
};

// Evaluates one template on its relation's test triplets: one record per
// subject with all per-record metrics and the last-position unit activations.
std::vector<EvalRecord> evaluate_template(const Parameters<float>& params, const Vocab& vocab,
                                          const Template& tmpl,
                                          const std::vector<Triplet>& triplets);

// A unit is active when its value exceeds 0 on strictly more than
// k * |subjects| of the template's instantiations.
ActivationMatrix activation_matrix_from_records(const std::vector<EvalRecord>& records,
                                                double k = 0.2);

ActivationMatrix activation_matrix(const Parameters<float>& params, const Vocab& vocab,
                                   const Template& tmpl, const std::vector<Triplet>& subjects,
                                   double k = 0.2);

// micro-accuracy of one template over its relation's triplets
double template_accuracy_from_records(const std::vector<EvalRecord>& records);

struct MicroAccuracy {
    std::map<std::string, double> per_template;
    std::map<std::string, std::map<PromptType, double>> per_task; // task -> type -> accuracy
    std::map<PromptType, double> per_type;                        // mean over templates
};

MicroAccuracy micro_accuracy(const std::vector<std::vector<EvalRecord>>& records_per_template);

// ---------------------------------------------------------------------------
// Uncertainty machinery
// ---------------------------------------------------------------------------

struct Ci {
    double lo = 0.0;
    double hi = 0.0;
};

// linear-interpolation empirical quantile (numpy-style), q in [0, 1]
double quantile_linear(std::vector<double> values, double q);

// [0.025, 0.975] empirical quantiles; fewer than two scores degenerate to the
// point itself
Ci quantile_ci(const std::vector<double>& scores);

struct BootstrapCi {
    double lo = 0.0;
    double hi = 0.0;
    int resamples = 0;
};

// Percentile bootstrap over item indices. The resample count doubles from 200
// until both endpoints move by less than 1% relative between rounds, capped
// at 51200. NaN statistics (undefined on a particular resample) are skipped.
using IndexStat = std::function<double(const std::vector<size_t>&)>;
BootstrapCi bootstrap_ci(const IndexStat& stat, size_t n_items, uint64_t seed);

struct PearsonResult {
    double r = 0.0;
    double p_value = 1.0;
    bool defined = false;
};

PearsonResult pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// two-sided p-value of a Student-t statistic
double student_t_two_sided_p(double t, int df);

// ---------------------------------------------------------------------------
// Pairwise statistics, correlations and report tables
// ---------------------------------------------------------------------------

std::string comparison_set_name(PromptType a, PromptType b);

// all same-relation unordered template pairs (self-pairs excluded)
std::vector<PairStat> build_pair_stats(
    const Parameters<float>& params, const Vocab& vocab, const std::vector<Template>& templates,
    const std::map<std::string, std::vector<EvalRecord>>& records_by_template,
    const std::map<std::string, ActivationMatrix>& matrices_by_template);

struct CorrelationCell {
    std::string comparison;  // e.g. "human_vs_m_disc"
    std::string axes;        // "input_vs_output" | "input_vs_activation" | "activation_vs_output"
    double r = 0.0;
    double p_value = 1.0;
    Ci ci;
    int resamples = 0;
    int n_pairs = 0;
    bool defined = false;
};

// Pearson correlations between input similarity, output agreement and
// activation overlap per comparison set, with template-resampling bootstrap
// CIs and t-test p-values.
std::vector<CorrelationCell> correlation_table(const std::vector<PairStat>& pair_stats,
                                               const std::vector<Template>& templates,
                                               uint64_t seed);

enum class PairStatKind { input_similarity, output_agreement, activation_overlap };

struct TypePairCell {
    PromptType type_a = PromptType::human;
    PromptType type_b = PromptType::human;
    double mean = 0.0;
    Ci ci;
    int resamples = 0;
    int n_pairs = 0;
};

// 3x3 type-pair means with bootstrap CIs (heatmap data)
std::vector<TypePairCell> type_pair_matrix(const std::vector<PairStat>& pair_stats,
                                           const std::vector<Template>& templates,
                                           PairStatKind kind, uint64_t seed);

// ---------------------------------------------------------------------------
// Table-1-style summary
// ---------------------------------------------------------------------------

struct SummaryRow {
    std::string metric; // accuracy | perplexity | attention | entropy_bits | entropy_nats
    PromptType type = PromptType::human;
    double mean = 0.0;
    Ci ci;
    int n_templates = 0;
};

// Template scores averaged subject -> relation -> template; CI from the
// 0.025/0.975 quantiles over template scores of one prompt type.
std::vector<SummaryRow> summarize_records(
    const std::map<std::string, std::vector<EvalRecord>>& records_by_template,
    const std::map<std::string, PromptType>& type_by_template);

// --- implementation of the templated spread reducer ---

template <typename T>
double attention_spread_percent(const ForwardTrace<T>& trace) {
    require(!trace.attention.empty(), ErrorKind::data, "trace has no captured attention");
    double total = 0.0;
    size_t rows = 0;
    std::vector<double> row;
    for (const auto& layer : trace.attention) {
        for (const auto& head : layer) {
            for (int t = 0; t < trace.seq_len; ++t) {
                row.assign(head.row(t), head.row(t) + t + 1);
                total += attention_row_spread_pct(row.data(), t + 1);
                ++rows;
            }
        }
    }
    return total / double(rows);
}

} // namespace plab
