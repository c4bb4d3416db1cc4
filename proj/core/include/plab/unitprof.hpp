#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "plab/diagnostics.hpp"
#include "plab/tasks.hpp"

namespace plab {

// Per-unit analyses: layer histograms of highly activated units, typical-unit
// selection, unit/vocabulary association via a corpus scan, and LMI ranking.

struct UnitId {
    int layer = 0;
    int unit = 0;

    bool operator==(const UnitId&) const = default;
    bool operator<(const UnitId& o) const {
        return layer != o.layer ? layer < o.layer : unit < o.unit;
    }
};

// Activation frequency of a unit for a prompt type: the fraction of
// (template, subject) evaluations of that type where the unit value is > 0
// at the prediction position.
struct UnitFrequencies {
    int layers = 0;
    int units_per_layer = 0;
    std::vector<double> overall;                      // pooled across types
    std::map<PromptType, std::vector<double>> per_type;

    size_t flat(const UnitId& id) const {
        return size_t(id.layer) * size_t(units_per_layer) + size_t(id.unit);
    }
    UnitId unflat(size_t i) const {
        return UnitId{int(i / size_t(units_per_layer)), int(i % size_t(units_per_layer))};
    }
};

UnitFrequencies activation_frequencies(const std::vector<EvalRecord>& records);

struct LayerHistogram {
    std::vector<UnitId> global_top;                        // top-fraction units overall
    std::map<PromptType, std::vector<int>> counts_per_layer; // [type] -> per-layer counts
};

// Global top-fraction unit set by overall activation frequency; per type,
// members of that set whose per-type frequency clears the activation-share
// threshold k, bucketed by layer.
LayerHistogram layer_histogram(const UnitFrequencies& freqs, double fraction = 0.20,
                               double k = 0.20);

// Mean |d(max output probability)/d(unit)| at the prediction position over a
// seeded sample of evaluation inputs, pooled across prompt types.
std::vector<double> unit_saliency(const Parameters<float>& params, const Vocab& vocab,
                                  const std::vector<Template>& templates, const TaskData& tasks,
                                  int sample_size, uint64_t seed);

// Typical units of type A: top-fraction most frequently activated by A,
// bottom-fraction for both other types, and saliency in the top quartile.
std::map<PromptType, std::vector<UnitId>> select_typical_units(
    const UnitFrequencies& freqs, const std::vector<double>& saliency, double top_fraction = 0.20,
    double bottom_fraction = 0.20, double saliency_fraction = 0.25);

// ---------------------------------------------------------------------------
// Corpus scan: one forward pass per window; input association accumulates a
// unit's activation at each position onto that position's token, output
// association onto the argmax-predicted token at that position.
// ---------------------------------------------------------------------------

struct AssociationTable {
    int layers = 0;
    int units_per_layer = 0;
    int vocab_size = 0;
    Mat<double> input_mean;           // [layers*units x vocab]
    Mat<double> output_mean;          // [layers*units x vocab]
    std::vector<int64_t> input_count; // per token
    std::vector<int64_t> output_count;
};

AssociationTable scan_corpus_associations(const Parameters<float>& params,
                                          const std::vector<int>& corpus_tokens, int bos_id,
                                          int window = 15, int stride = 15);

struct RankedItem {
    std::string item;
    double mean_activation = 0.0;
};

// Top vocabulary items for one unit: lower-cased, leading-space-stripped,
// duplicates merged keeping the maximum, ranked by descending mean.
std::vector<RankedItem> top_items(const AssociationTable& table, const Vocab& vocab, UnitId unit,
                                  bool output_side, int cap = 500);

// |v,t| counts: how many typical units of each prompt type carry item v in
// their top-item list.
using FrequencyLists = std::map<PromptType, std::map<std::string, int>>;

FrequencyLists frequency_lists(
    const std::map<PromptType, std::vector<UnitId>>& typical_units,
    const std::map<PromptType, std::vector<std::vector<RankedItem>>>& items_per_unit);

struct LmiEntry {
    std::string item;
    double lmi = 0.0;
    int count = 0;
};

// LMI = |v,t| * ln(P(v,t) / (P(v) P(t))); natural log, zero-count items score
// zero. Full descending ranking per type.
std::map<PromptType, std::vector<LmiEntry>> lmi_rank(const FrequencyLists& lists);

} // namespace plab
