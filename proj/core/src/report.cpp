#include "plab/report.hpp"

#include <algorithm>
#include <cmath>

#include "plab/io_util.hpp"

namespace plab {

namespace {

std::string csv_bool(bool b) {
    return b ? "1" : "0";
}

} // namespace

void write_records_csv(const std::filesystem::path& path,
                       const std::map<std::string, std::vector<EvalRecord>>& records_by_template) {
    std::string out = "template_id,relation,type,subject,object,predicted,correct,"
                      "entropy_bits,entropy_nats,perplexity,attention_spread_pct\n";
    for (const auto& [tid, records] : records_by_template) {
        for (const auto& r : records) {
            out += tid + "," + r.relation_id + "," + prompt_type_name(r.type) + "," + r.subject +
                   "," + r.object + "," + r.predicted + "," + csv_bool(r.correct) + "," +
                   fmt_g6(r.entropy_bits) + "," + fmt_g6(r.entropy_nats) + ",";
            if (r.has_perplexity()) {
                out += fmt_g6(r.perplexity);
            }
            out += "," + fmt_g6(r.attention_spread_pct) + "\n";
        }
    }
    write_text_file(path, out);
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
    std::string out = "metric,type,mean,ci_lo,ci_hi,n_templates\n";
    for (const auto& r : rows) {
        out += r.metric + "," + prompt_type_name(r.type) + "," + fmt_g6(r.mean) + "," +
               fmt_g6(r.ci.lo) + "," + fmt_g6(r.ci.hi) + "," + std::to_string(r.n_templates) +
               "\n";
    }
    write_text_file(path, out);
}

void write_pairs_csv(const std::filesystem::path& path, const std::vector<PairStat>& pairs) {
    std::string out =
        "relation,template_a,template_b,type_a,type_b,input_similarity,output_agreement,"
        "activation_overlap\n";
    for (const auto& p : pairs) {
        out += p.relation_id + "," + p.id_a + "," + p.id_b + "," + prompt_type_name(p.type_a) +
               "," + prompt_type_name(p.type_b) + "," + fmt_g6(p.input_similarity) + "," +
               fmt_g6(p.output_agreement) + "," + fmt_g6(p.activation_overlap) + "\n";
    }
    write_text_file(path, out);
}

void write_correlations_csv(const std::filesystem::path& path,
                            const std::vector<CorrelationCell>& cells) {
    std::string out = "comparison,axes,r,ci_lo,ci_hi,p_value,significant,n_pairs,resamples,"
                      "defined\n";
    for (const auto& c : cells) {
        out += c.comparison + "," + c.axes + ",";
        if (c.defined) {
            out += fmt_g6(c.r) + "," + fmt_g6(c.ci.lo) + "," + fmt_g6(c.ci.hi) + "," +
                   fmt_g6(c.p_value) + "," + csv_bool(c.p_value < 0.01);
        } else {
            out += "undefined,,,,";
        }
        out += "," + std::to_string(c.n_pairs) + "," + std::to_string(c.resamples) + "," +
               csv_bool(c.defined) + "\n";
    }
    write_text_file(path, out);
}

void write_heatmap_csv(const std::filesystem::path& base, const std::vector<TypePairCell>& cells) {
    auto value_of = [&](PromptType a, PromptType b, int which) {
        for (const auto& c : cells) {
            if ((c.type_a == a && c.type_b == b) || (c.type_a == b && c.type_b == a)) {
                return which == 0 ? c.mean : which == 1 ? c.ci.lo : c.ci.hi;
            }
        }
        return 0.0;
    };
    for (int which = 0; which < 3; ++which) {
        std::string out = "type";
        for (PromptType t : kAllPromptTypes) {
            out += std::string(",") + prompt_type_name(t);
        }
        out += "\n";
        for (PromptType a : kAllPromptTypes) {
            out += prompt_type_name(a);
            for (PromptType b : kAllPromptTypes) {
                out += "," + fmt_g6(value_of(a, b, which));
            }
            out += "\n";
        }
        const char* suffix = which == 0 ? "_mean.csv" : which == 1 ? "_ci_lo.csv" : "_ci_hi.csv";
        write_text_file(base.string() + suffix, out);
    }
}

void write_filter_counts_csv(const std::filesystem::path& path, const FilterResult& result) {
    std::string out = "task,human,m_disc,m_cont\n";
    for (const auto& [task, counts] : result.per_task_counts) {
        out += task;
        for (PromptType t : kAllPromptTypes) {
            auto it = counts.find(t);
            out += "," + std::to_string(it == counts.end() ? 0 : it->second);
        }
        out += "\n";
    }
    out += "average";
    for (PromptType t : kAllPromptTypes) {
        auto it = result.avg_templates_per_task.find(t);
        out += "," + fmt_g6(it == result.avg_templates_per_task.end() ? 0.0 : it->second);
    }
    out += "\n";
    write_text_file(path, out);
}

void write_control_csv(const std::filesystem::path& path, const ControlReport& report) {
    std::string out = "model_seed,relation,method,accuracy,majority_class_freq,n_eval\n";
    for (const auto& r : report.rows) {
        out += std::to_string(r.model_seed) + "," + r.relation_id + "," + r.method + "," +
               fmt_g6(r.accuracy) + "," + fmt_g6(r.majority_class_freq) + "," +
               std::to_string(r.n_eval) + "\n";
    }
    write_text_file(path, out);
}

void write_probes_csv(const std::filesystem::path& path, const std::vector<ProbeResult>& results) {
    std::string out = "layer,pair,mean_accuracy,std_accuracy,mean_sparsity,runs\n";
    for (const auto& r : results) {
        out += std::to_string(r.layer) + "," + r.pair + "," + fmt_g6(r.mean_accuracy) + "," +
               fmt_g6(r.std_accuracy) + "," + fmt_g6(r.mean_sparsity) + "," +
               std::to_string(r.runs) + "\n";
    }
    write_text_file(path, out);
}

void write_layer_histogram_csv(const std::filesystem::path& path, const LayerHistogram& hist) {
    std::string out = "layer,type,count\n";
    for (const auto& [type, counts] : hist.counts_per_layer) {
        for (size_t layer = 0; layer < counts.size(); ++layer) {
            out += std::to_string(layer) + std::string(",") + prompt_type_name(type) + "," +
                   std::to_string(counts[layer]) + "\n";
        }
    }
    write_text_file(path, out);
}

void write_units_csv(const std::filesystem::path& path, const std::vector<UnitsCsvRow>& rows) {
    std::string out = "layer,unit,freq_human,freq_m_disc,freq_m_cont,saliency,typical_for\n";
    for (const auto& r : rows) {
        out += std::to_string(r.unit.layer) + "," + std::to_string(r.unit.unit) + "," +
               fmt_g6(r.freq_human) + "," + fmt_g6(r.freq_m_disc) + "," + fmt_g6(r.freq_m_cont) +
               "," + fmt_g6(r.saliency) + "," + r.typical_for + "\n";
    }
    write_text_file(path, out);
}

void write_association_csv(const std::filesystem::path& path,
                           const std::vector<RankedItem>& input_items,
                           const std::vector<RankedItem>& output_items) {
    std::string out = "kind,rank,item,mean_activation\n";
    for (size_t i = 0; i < input_items.size(); ++i) {
        out += "in," + std::to_string(i + 1) + "," + input_items[i].item + "," +
               fmt_g6(input_items[i].mean_activation) + "\n";
    }
    for (size_t i = 0; i < output_items.size(); ++i) {
        out += "out," + std::to_string(i + 1) + "," + output_items[i].item + "," +
               fmt_g6(output_items[i].mean_activation) + "\n";
    }
    write_text_file(path, out);
}

void write_lmi_csv(const std::filesystem::path& path, const std::vector<LmiEntry>& input_ranking,
                   const std::vector<LmiEntry>& output_ranking, int top) {
    std::string out = "kind,rank,item,lmi,count\n";
    auto emit = [&](const char* kind, const std::vector<LmiEntry>& ranking) {
        const size_t n = std::min(size_t(top), ranking.size());
        for (size_t i = 0; i < n; ++i) {
            out += std::string(kind) + "," + std::to_string(i + 1) + "," + ranking[i].item + "," +
                   fmt_g6(ranking[i].lmi) + "," + std::to_string(ranking[i].count) + "\n";
        }
    };
    emit("in", input_ranking);
    emit("out", output_ranking);
    write_text_file(path, out);
}

int CsvTable::column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) {
            return int(i);
        }
    }
    fail(ErrorKind::data, "csv column not found: " + name);
}

CsvTable read_csv(const std::filesystem::path& path) {
    require(std::filesystem::exists(path), ErrorKind::io, "missing input file: " + path.string());
    CsvTable table;
    const auto lines = read_lines(path);
    require(!lines.empty(), ErrorKind::data, "empty csv: " + path.string());
    table.header = split_char(lines[0], ',');
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            continue;
        }
        table.rows.push_back(split_char(lines[i], ','));
    }
    return table;
}

LabeledMatrix read_labeled_matrix(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    LabeledMatrix out;
    const size_t n = table.rows.size();
    require(table.header.size() == n + 1, ErrorKind::data,
            "matrix csv is not square: " + path.string());
    out.labels.assign(table.header.begin() + 1, table.header.end());
    out.values = Mat<double>(int(n), int(n));
    for (size_t r = 0; r < n; ++r) {
        require(table.rows[r].size() == n + 1, ErrorKind::data, "ragged matrix csv row");
        for (size_t c = 0; c < n; ++c) {
            out.values.at(int(r), int(c)) = std::stod(table.rows[r][c + 1]);
        }
    }
    return out;
}

} // namespace plab
