#include "plab/unitprof.hpp"

#include <algorithm>
#include <cmath>

#include "plab/hash.hpp"
#include "plab/io_util.hpp"
#include "plab/rng.hpp"

namespace plab {

UnitFrequencies activation_frequencies(const std::vector<EvalRecord>& records) {
    require(!records.empty(), ErrorKind::data, "activation frequencies of an empty record list");
    UnitFrequencies out;
    out.layers = int(records.front().unit_activations.size());
    out.units_per_layer = int(records.front().unit_activations.front().size());
    const size_t total = size_t(out.layers) * size_t(out.units_per_layer);
    out.overall.assign(total, 0.0);

    std::map<PromptType, int> type_counts;
    for (const auto& rec : records) {
        auto& per_type = out.per_type[rec.type];
        if (per_type.empty()) {
            per_type.assign(total, 0.0);
        }
        type_counts[rec.type] += 1;
        for (int l = 0; l < out.layers; ++l) {
            const auto& row = rec.unit_activations[size_t(l)];
            for (int u = 0; u < out.units_per_layer; ++u) {
                if (row[size_t(u)] > 0.0f) {
                    const size_t i = size_t(l) * size_t(out.units_per_layer) + size_t(u);
                    out.overall[i] += 1.0;
                    per_type[i] += 1.0;
                }
            }
        }
    }
    for (auto& f : out.overall) {
        f /= double(records.size());
    }
    for (auto& [type, freqs] : out.per_type) {
        for (auto& f : freqs) {
            f /= double(type_counts[type]);
        }
    }
    return out;
}

namespace {

// indices ranked by descending value, ties by ascending index
std::vector<size_t> rank_desc(const std::vector<double>& values) {
    std::vector<size_t> order(values.size());
    for (size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (values[a] != values[b]) {
            return values[a] > values[b];
        }
        return a < b;
    });
    return order;
}

size_t fraction_count(size_t total, double fraction) {
    return std::max<size_t>(1, size_t(std::floor(fraction * double(total))));
}

} // namespace

LayerHistogram layer_histogram(const UnitFrequencies& freqs, double fraction, double k) {
    const size_t total = freqs.overall.size();
    require(total > 0, ErrorKind::data, "layer histogram without frequencies");

    LayerHistogram out;
    const auto order = rank_desc(freqs.overall);
    const size_t top_n = fraction_count(total, fraction);
    for (size_t i = 0; i < top_n; ++i) {
        out.global_top.push_back(freqs.unflat(order[i]));
    }
    std::sort(out.global_top.begin(), out.global_top.end());

    for (const auto& [type, type_freqs] : freqs.per_type) {
        std::vector<int> counts(size_t(freqs.layers), 0);
        for (const UnitId& id : out.global_top) {
            if (type_freqs[freqs.flat(id)] > k) {
                counts[size_t(id.layer)] += 1;
            }
        }
        out.counts_per_layer[type] = std::move(counts);
    }
    return out;
}

std::vector<double> unit_saliency(const Parameters<float>& params, const Vocab& vocab,
                                  const std::vector<Template>& templates, const TaskData& tasks,
                                  int sample_size, uint64_t seed) {
    require(!templates.empty(), ErrorKind::data, "saliency needs templates");
    const size_t total = size_t(params.config.num_layers) * size_t(params.config.ff_dim);
    std::vector<double> sums(total, 0.0);

    // all (template, subject) instances, pooled across prompt types
    std::vector<std::pair<const Template*, const Triplet*>> instances;
    for (const auto& tmpl : templates) {
        const RelationTask& task = tasks.relation(tmpl.relation_id);
        for (const auto& tr : task.test) {
            instances.emplace_back(&tmpl, &tr);
        }
    }
    require(!instances.empty(), ErrorKind::data, "saliency: no evaluation instances");

    Rng rng(derive_seed(seed, "saliency"));
    rng.shuffle(instances);
    const size_t n = std::min(size_t(sample_size), instances.size());

    for (size_t k = 0; k < n; ++k) {
        const auto& [tmpl, tr] = instances[k];
        MixedSequence seq;
        seq.push_token(vocab.bos_id());
        MixedSequence inst = instantiate(*tmpl, tr->subject, vocab);
        for (auto& e : inst.elems) {
            seq.elems.push_back(std::move(e));
        }
        LossSpec spec{LossMode::max_prob, seq.length() - 1, -1};
        auto res = loss_and_gradients(params, seq, spec);
        const int last = seq.length() - 1;
        for (int l = 0; l < params.config.num_layers; ++l) {
            const float* g = res.grads.grad_units[size_t(l)].row(last);
            for (int u = 0; u < params.config.ff_dim; ++u) {
                sums[size_t(l) * size_t(params.config.ff_dim) + size_t(u)] +=
                    std::abs(double(g[u]));
            }
        }
    }
    for (auto& s : sums) {
        s /= double(n);
    }
    return sums;
}

std::map<PromptType, std::vector<UnitId>> select_typical_units(const UnitFrequencies& freqs,
                                                               const std::vector<double>& saliency,
                                                               double top_fraction,
                                                               double bottom_fraction,
                                                               double saliency_fraction) {
    const size_t total = freqs.overall.size();
    require(saliency.size() == total, ErrorKind::shape,
            "saliency vector does not match the unit grid");
    require(top_fraction + bottom_fraction <= 1.0, ErrorKind::config,
            "top and bottom fractions overlap");

    // per type: top-fraction set and bottom-fraction set under a strict
    // deterministic ranking, so the two can never intersect
    std::map<PromptType, std::vector<uint8_t>> top_sets, bottom_sets;
    for (const auto& [type, type_freqs] : freqs.per_type) {
        const auto order = rank_desc(type_freqs);
        const size_t top_n = fraction_count(total, top_fraction);
        const size_t bottom_n = fraction_count(total, bottom_fraction);
        std::vector<uint8_t> top(total, 0), bottom(total, 0);
        for (size_t i = 0; i < top_n; ++i) {
            top[order[i]] = 1;
        }
        for (size_t i = 0; i < bottom_n; ++i) {
            bottom[order[total - 1 - i]] = 1;
        }
        top_sets[type] = std::move(top);
        bottom_sets[type] = std::move(bottom);
    }

    const auto sal_order = rank_desc(saliency);
    std::vector<uint8_t> salient(total, 0);
    const size_t sal_n = fraction_count(total, saliency_fraction);
    for (size_t i = 0; i < sal_n; ++i) {
        salient[sal_order[i]] = 1;
    }

    std::map<PromptType, std::vector<UnitId>> out;
    for (const auto& [type, top] : top_sets) {
        std::vector<UnitId> units;
        for (size_t i = 0; i < total; ++i) {
            if (!top[i] || !salient[i]) {
                continue;
            }
            bool bottom_elsewhere = true;
            for (const auto& [other, bottom] : bottom_sets) {
                if (other != type && !bottom[i]) {
                    bottom_elsewhere = false;
                    break;
                }
            }
            if (bottom_elsewhere) {
                units.push_back(freqs.unflat(i));
            }
        }
        out[type] = std::move(units);
    }
    return out;
}

AssociationTable scan_corpus_associations(const Parameters<float>& params,
                                          const std::vector<int>& corpus_tokens, int bos_id,
                                          int window, int stride) {
    const ModelConfig& cfg = params.config;
    require(window >= 1 && window <= cfg.context_length - 1, ErrorKind::config,
            "scan window must fit the context alongside the BOS");
    require(stride >= 1, ErrorKind::config, "scan stride must be >= 1");
    require(!corpus_tokens.empty(), ErrorKind::data, "scan over an empty corpus");

    AssociationTable table;
    table.layers = cfg.num_layers;
    table.units_per_layer = cfg.ff_dim;
    table.vocab_size = cfg.vocab_size;
    const int total_units = cfg.num_layers * cfg.ff_dim;
    table.input_mean = Mat<double>(total_units, cfg.vocab_size);
    table.output_mean = Mat<double>(total_units, cfg.vocab_size);
    table.input_count.assign(size_t(cfg.vocab_size), 0);
    table.output_count.assign(size_t(cfg.vocab_size), 0);

    Workspace<float> ws;
    for (size_t start = 0; start < corpus_tokens.size(); start += size_t(stride)) {
        const size_t end = std::min(start + size_t(window), corpus_tokens.size());
        MixedSequence seq;
        seq.push_token(bos_id);
        for (size_t i = start; i < end; ++i) {
            seq.push_token(corpus_tokens[i]);
        }
        if (seq.length() < 2) {
            break;
        }
        forward_ws(params, seq, ws);

        for (int pos = 1; pos < seq.length(); ++pos) {
            const int in_tok = seq.elems[size_t(pos)].token;
            const int out_tok = argmax_lowest(ws.logits.row(pos), cfg.vocab_size);
            table.input_count[size_t(in_tok)] += 1;
            table.output_count[size_t(out_tok)] += 1;
            for (int l = 0; l < cfg.num_layers; ++l) {
                const float* u = ws.layers[size_t(l)].units.row(pos);
                for (int k = 0; k < cfg.ff_dim; ++k) {
                    const int unit_row = l * cfg.ff_dim + k;
                    table.input_mean.at(unit_row, in_tok) += double(u[k]);
                    table.output_mean.at(unit_row, out_tok) += double(u[k]);
                }
            }
        }
        if (end == corpus_tokens.size()) {
            break;
        }
    }

    // sums -> means
    for (int row = 0; row < total_units; ++row) {
        double* in = table.input_mean.row(row);
        double* outp = table.output_mean.row(row);
        for (int v = 0; v < cfg.vocab_size; ++v) {
            if (table.input_count[size_t(v)] > 0) {
                in[v] /= double(table.input_count[size_t(v)]);
            }
            if (table.output_count[size_t(v)] > 0) {
                outp[v] /= double(table.output_count[size_t(v)]);
            }
        }
    }
    return table;
}

std::vector<RankedItem> top_items(const AssociationTable& table, const Vocab& vocab, UnitId unit,
                                  bool output_side, int cap) {
    const int row = unit.layer * table.units_per_layer + unit.unit;
    const Mat<double>& means = output_side ? table.output_mean : table.input_mean;
    const auto& counts = output_side ? table.output_count : table.input_count;

    // normalize item strings, merge duplicates keeping the maximum mean
    std::map<std::string, double> merged;
    for (int v = 0; v < table.vocab_size; ++v) {
        if (counts[size_t(v)] == 0) {
            continue; // token never seen on this side of the scan
        }
        const std::string item = lowercase(strip_leading_space(vocab.token(v)));
        auto [it, inserted] = merged.emplace(item, means.at(row, v));
        if (!inserted) {
            it->second = std::max(it->second, means.at(row, v));
        }
    }

    std::vector<RankedItem> items;
    items.reserve(merged.size());
    for (const auto& [item, mean] : merged) {
        items.push_back(RankedItem{item, mean});
    }
    std::stable_sort(items.begin(), items.end(), [](const RankedItem& a, const RankedItem& b) {
        if (a.mean_activation != b.mean_activation) {
            return a.mean_activation > b.mean_activation;
        }
        return a.item < b.item;
    });
    if (int(items.size()) > cap) {
        items.resize(size_t(cap));
    }
    return items;
}

FrequencyLists frequency_lists(
    const std::map<PromptType, std::vector<UnitId>>& typical_units,
    const std::map<PromptType, std::vector<std::vector<RankedItem>>>& items_per_unit) {
    FrequencyLists lists;
    for (const auto& [type, units] : typical_units) {
        auto& counts = lists[type];
        auto it = items_per_unit.find(type);
        if (it == items_per_unit.end()) {
            continue;
        }
        require(it->second.size() == units.size(), ErrorKind::shape,
                "item lists do not match the typical unit set");
        for (const auto& unit_items : it->second) {
            for (const auto& ranked : unit_items) {
                counts[ranked.item] += 1;
            }
        }
    }
    return lists;
}

std::map<PromptType, std::vector<LmiEntry>> lmi_rank(const FrequencyLists& lists) {
    int64_t grand_total = 0;
    std::map<std::string, int64_t> item_totals;
    std::map<PromptType, int64_t> type_totals;
    for (const auto& [type, counts] : lists) {
        for (const auto& [item, n] : counts) {
            grand_total += n;
            item_totals[item] += n;
            type_totals[type] += n;
        }
    }
    require(grand_total > 0, ErrorKind::data, "LMI over empty frequency lists");

    std::map<PromptType, std::vector<LmiEntry>> out;
    for (const auto& [type, counts] : lists) {
        std::vector<LmiEntry> entries;
        const double p_t = double(type_totals.at(type)) / double(grand_total);
        // rank the union of items: zero-count items score zero by definition
        for (const auto& [item, item_total] : item_totals) {
            auto it = counts.find(item);
            const int64_t n = it == counts.end() ? 0 : it->second;
            LmiEntry e;
            e.item = item;
            e.count = int(n);
            if (n > 0 && p_t > 0.0) {
                const double p_vt = double(n) / double(grand_total);
                const double p_v = double(item_total) / double(grand_total);
                e.lmi = double(n) * std::log(p_vt / (p_v * p_t));
            }
            entries.push_back(std::move(e));
        }
        std::stable_sort(entries.begin(), entries.end(), [](const LmiEntry& a, const LmiEntry& b) {
            if (a.lmi != b.lmi) {
                return a.lmi > b.lmi;
            }
            return a.item < b.item;
        });
        out[type] = std::move(entries);
    }
    return out;
}

} // namespace plab
