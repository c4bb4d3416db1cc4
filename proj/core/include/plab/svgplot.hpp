#pragma once

#include <string>
#include <vector>

#include "plab/mat.hpp"

namespace plab {

// Deterministic vector-image emitters. Pure string builders with fixed float
// formatting: the same inputs always produce byte-identical SVG.

// Square-matrix heatmap: cell color and inner-square size scale with the
// value, outline stroke width encodes the confidence-interval width.
std::string svg_heatmap(const std::string& title, const std::vector<std::string>& labels,
                        const Mat<double>& mean, const Mat<double>& ci_lo, const Mat<double>& ci_hi,
                        double value_scale);

// Grouped per-layer bars, one group per layer with one bar per series.
std::string svg_layer_histogram(const std::string& title,
                                const std::vector<std::string>& series_names,
                                const std::vector<std::vector<int>>& counts_per_series);

struct LineSeries {
    std::string name;
    std::vector<double> mean; // per layer
    std::vector<double> std_dev;
};

// Per-layer accuracies with +-std bands and a dashed 0.5 baseline.
std::string svg_probe_lines(const std::string& title, const std::vector<LineSeries>& series);

} // namespace plab
