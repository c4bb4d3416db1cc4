#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "plab/diagnostics.hpp"
#include "plab/induce.hpp"
#include "plab/probes.hpp"
#include "plab/unitprof.hpp"

namespace plab {

// CSV emission and ingestion for every report artifact. All writers order
// rows deterministically and format floats identically, so reruns are
// byte-identical.

void write_records_csv(const std::filesystem::path& path,
                       const std::map<std::string, std::vector<EvalRecord>>& records_by_template);

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);

void write_pairs_csv(const std::filesystem::path& path, const std::vector<PairStat>& pairs);

void write_correlations_csv(const std::filesystem::path& path,
                            const std::vector<CorrelationCell>& cells);

// writes <base>_mean.csv, <base>_ci_lo.csv, <base>_ci_hi.csv as labeled
// 3x3 square matrices (symmetric completion of the 6 unordered cells)
void write_heatmap_csv(const std::filesystem::path& base, const std::vector<TypePairCell>& cells);

void write_filter_counts_csv(const std::filesystem::path& path, const FilterResult& result);

void write_control_csv(const std::filesystem::path& path, const ControlReport& report);

void write_probes_csv(const std::filesystem::path& path, const std::vector<ProbeResult>& results);

void write_layer_histogram_csv(const std::filesystem::path& path, const LayerHistogram& hist);

struct UnitsCsvRow {
    UnitId unit;
    double freq_human = 0.0;
    double freq_m_disc = 0.0;
    double freq_m_cont = 0.0;
    double saliency = 0.0;
    std::string typical_for; // empty when not typical of any type
};

void write_units_csv(const std::filesystem::path& path, const std::vector<UnitsCsvRow>& rows);

void write_association_csv(const std::filesystem::path& path,
                           const std::vector<RankedItem>& input_items,
                           const std::vector<RankedItem>& output_items);

void write_lmi_csv(const std::filesystem::path& path, const std::vector<LmiEntry>& input_ranking,
                   const std::vector<LmiEntry>& output_ranking, int top);

// tiny CSV reader for the plot emitter and the acceptance suite
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

// square matrix with row/column labels, as written by write_heatmap_csv
struct LabeledMatrix {
    std::vector<std::string> labels;
    Mat<double> values;
};

LabeledMatrix read_labeled_matrix(const std::filesystem::path& path);

} // namespace plab
