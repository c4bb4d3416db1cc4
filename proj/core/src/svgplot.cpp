#include "plab/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "plab/errors.hpp"

namespace plab {

namespace {

std::string f2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
}

const char* kSeriesColors[] = {"#4878cf", "#d65f5f", "#6acc65", "#b47cc7", "#c4ad66"};

std::string svg_open(int width, int height, const std::string& title) {
    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
           " " + std::to_string(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + std::to_string(width / 2) +
           "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
           title + "</text>\n";
    return out;
}

} // namespace

std::string svg_heatmap(const std::string& title, const std::vector<std::string>& labels,
                        const Mat<double>& mean, const Mat<double>& ci_lo, const Mat<double>& ci_hi,
                        double value_scale) {
    const int n = mean.rows;
    require(n == mean.cols && n == int(labels.size()), ErrorKind::shape,
            "heatmap needs a labeled square matrix");
    require(ci_lo.rows == n && ci_hi.rows == n, ErrorKind::shape, "heatmap ci shape mismatch");

    const int cell = 92;
    const int margin = 86;
    const int width = margin + n * cell + 24;
    const int height = margin + n * cell + 24;
    std::string out = svg_open(width, height, title);

    for (int i = 0; i < n; ++i) {
        const int cx = margin + i * cell + cell / 2;
        out += "<text x=\"" + std::to_string(cx) + "\" y=\"" + std::to_string(margin - 10) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
               labels[size_t(i)] + "</text>\n";
        const int cy = margin + i * cell + cell / 2;
        out += "<text x=\"" + std::to_string(margin - 8) + "\" y=\"" + std::to_string(cy + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" +
               labels[size_t(i)] + "</text>\n";
    }

    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const double v = value_scale > 0.0 ? std::clamp(mean.at(r, c) / value_scale, 0.0, 1.0)
                                               : 0.0;
            const double ci_width = std::max(0.0, ci_hi.at(r, c) - ci_lo.at(r, c));
            const double stroke =
                0.5 + (value_scale > 0.0 ? 6.0 * std::min(1.0, ci_width / value_scale) : 0.0);
            // inner square scales with the value; color darkens with it
            const double side = (0.25 + 0.75 * v) * (cell - 14);
            const int shade = int(std::lround(235.0 - 180.0 * v));
            const double x = margin + c * cell + (cell - side) / 2.0;
            const double y = margin + r * cell + (cell - side) / 2.0;
            out += "<rect x=\"" + std::to_string(margin + c * cell) + "\" y=\"" +
                   std::to_string(margin + r * cell) + "\" width=\"" + std::to_string(cell) +
                   "\" height=\"" + std::to_string(cell) +
                   "\" fill=\"none\" stroke=\"#cccccc\" stroke-width=\"0.5\"/>\n";
            out += "<rect x=\"" + f2(x) + "\" y=\"" + f2(y) + "\" width=\"" + f2(side) +
                   "\" height=\"" + f2(side) + "\" fill=\"rgb(" + std::to_string(shade) + "," +
                   std::to_string(shade) + ",255)\" stroke=\"#333333\" stroke-width=\"" +
                   f2(stroke) + "\"/>\n";
            out += "<text x=\"" + std::to_string(margin + c * cell + cell / 2) + "\" y=\"" +
                   std::to_string(margin + r * cell + cell / 2 + 4) +
                   "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
                   f2(mean.at(r, c)) + "</text>\n";
        }
    }
    out += "</svg>\n";
    return out;
}

std::string svg_layer_histogram(const std::string& title,
                                const std::vector<std::string>& series_names,
                                const std::vector<std::vector<int>>& counts_per_series) {
    require(!counts_per_series.empty(), ErrorKind::data, "histogram without series");
    require(series_names.size() == counts_per_series.size(), ErrorKind::shape,
            "histogram series/name mismatch");
    const int layers = int(counts_per_series.front().size());
    int max_count = 1;
    for (const auto& series : counts_per_series) {
        require(int(series.size()) == layers, ErrorKind::shape, "ragged histogram series");
        for (int c : series) {
            max_count = std::max(max_count, c);
        }
    }

    const int ns = int(series_names.size());
    const int bar = 22;
    const int group = ns * bar + 26;
    const int plot_h = 220;
    const int margin = 52;
    const int width = margin + layers * group + 150;
    const int height = margin + plot_h + 60;
    std::string out = svg_open(width, height, title);

    for (int l = 0; l < layers; ++l) {
        for (int s = 0; s < ns; ++s) {
            const int c = counts_per_series[size_t(s)][size_t(l)];
            const double h = plot_h * double(c) / double(max_count);
            const double x = margin + l * group + s * bar;
            const double y = margin + plot_h - h;
            out += "<rect x=\"" + f2(x) + "\" y=\"" + f2(y) + "\" width=\"" +
                   std::to_string(bar - 4) + "\" height=\"" + f2(h) + "\" fill=\"" +
                   kSeriesColors[s % 5] + "\"/>\n";
            out += "<text x=\"" + f2(x + (bar - 4) / 2.0) + "\" y=\"" + f2(y - 4) +
                   "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" +
                   std::to_string(c) + "</text>\n";
        }
        out += "<text x=\"" + f2(margin + l * group + (ns * bar) / 2.0) + "\" y=\"" +
               std::to_string(margin + plot_h + 18) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">layer " +
               std::to_string(l) + "</text>\n";
    }
    for (int s = 0; s < ns; ++s) {
        const int y = margin + 18 * s;
        out += "<rect x=\"" + std::to_string(margin + layers * group + 12) + "\" y=\"" +
               std::to_string(y) + "\" width=\"12\" height=\"12\" fill=\"" +
               kSeriesColors[s % 5] + "\"/>\n";
        out += "<text x=\"" + std::to_string(margin + layers * group + 30) + "\" y=\"" +
               std::to_string(y + 10) + "\" font-family=\"sans-serif\" font-size=\"12\">" +
               series_names[size_t(s)] + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

std::string svg_probe_lines(const std::string& title, const std::vector<LineSeries>& series) {
    require(!series.empty() && !series.front().mean.empty(), ErrorKind::data,
            "probe plot without data");
    const int layers = int(series.front().mean.size());
    const int plot_w = std::max(260, 70 * (layers - 1));
    const int plot_h = 220;
    const int margin = 56;
    const int width = margin + plot_w + 170;
    const int height = margin + plot_h + 50;
    std::string out = svg_open(width, height, title);

    auto x_of = [&](int layer) {
        return layers == 1 ? margin + plot_w / 2.0
                           : margin + plot_w * double(layer) / double(layers - 1);
    };
    auto y_of = [&](double acc) { return margin + plot_h * (1.0 - acc); };

    // 50% balanced baseline
    out += "<line x1=\"" + std::to_string(margin) + "\" y1=\"" + f2(y_of(0.5)) + "\" x2=\"" +
           f2(margin + plot_w) + "\" y2=\"" + f2(y_of(0.5)) +
           "\" stroke=\"#888888\" stroke-dasharray=\"6,4\"/>\n";
    out += "<text x=\"" + std::to_string(margin + plot_w + 6) + "\" y=\"" + f2(y_of(0.5) + 4) +
           "\" font-family=\"sans-serif\" font-size=\"11\">baseline 0.50</text>\n";

    for (size_t s = 0; s < series.size(); ++s) {
        const auto& ls = series[s];
        require(int(ls.mean.size()) == layers && ls.std_dev.size() == ls.mean.size(),
                ErrorKind::shape, "ragged probe series");
        // std band
        std::string band = "<path d=\"M";
        for (int l = 0; l < layers; ++l) {
            band += f2(x_of(l)) + " " + f2(y_of(std::min(1.0, ls.mean[size_t(l)] + ls.std_dev[size_t(l)]))) + " L";
        }
        for (int l = layers - 1; l >= 0; --l) {
            band += f2(x_of(l)) + " " + f2(y_of(std::max(0.0, ls.mean[size_t(l)] - ls.std_dev[size_t(l)])));
            band += l > 0 ? " L" : "";
        }
        band += " Z\" fill=\"" + std::string(kSeriesColors[s % 5]) + "\" fill-opacity=\"0.18\"/>\n";
        out += band;

        std::string line = "<polyline points=\"";
        for (int l = 0; l < layers; ++l) {
            line += f2(x_of(l)) + "," + f2(y_of(ls.mean[size_t(l)])) + " ";
        }
        line += "\" fill=\"none\" stroke=\"" + std::string(kSeriesColors[s % 5]) +
                "\" stroke-width=\"2\"/>\n";
        out += line;

        const int ly = margin + 18 * int(s);
        out += "<rect x=\"" + std::to_string(margin + plot_w + 6) + "\" y=\"" +
               std::to_string(ly + 18) + "\" width=\"12\" height=\"12\" fill=\"" +
               kSeriesColors[s % 5] + "\"/>\n";
        out += "<text x=\"" + std::to_string(margin + plot_w + 24) + "\" y=\"" +
               std::to_string(ly + 28) + "\" font-family=\"sans-serif\" font-size=\"12\">" +
               ls.name + "</text>\n";
    }

    // axes ticks
    for (double acc : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        out += "<text x=\"" + std::to_string(margin - 8) + "\" y=\"" + f2(y_of(acc) + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + f2(acc) +
               "</text>\n";
    }
    for (int l = 0; l < layers; ++l) {
        out += "<text x=\"" + f2(x_of(l)) + "\" y=\"" + std::to_string(margin + plot_h + 16) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">L" +
               std::to_string(l) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

} // namespace plab
