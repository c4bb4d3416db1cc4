#include "plab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "plab/hash.hpp"
#include "plab/rng.hpp"

namespace plab {

size_t ActivationMatrix::count_active() const {
    size_t n = 0;
    for (uint8_t b : active) {
        n += b != 0;
    }
    return n;
}

// ---------------------------------------------------------------------------
// Elementary metrics
// ---------------------------------------------------------------------------

double output_entropy_nats(const std::vector<double>& dist) {
    require(!dist.empty(), ErrorKind::data, "entropy of an empty distribution");
    double sum = 0.0;
    for (double p : dist) {
        require(p >= 0.0, ErrorKind::domain, "entropy: negative probability mass");
        sum += p;
    }
    require(std::abs(sum - 1.0) < 1e-6, ErrorKind::domain,
            "entropy: distribution does not sum to 1");
    double h = 0.0;
    for (double p : dist) {
        if (p > 0.0) {
            h -= p * std::log(p);
        }
    }
    return h;
}

double attention_row_spread_pct(const double* row, int prefix_len) {
    require(prefix_len >= 1, ErrorKind::data, "attention row with empty prefix");
    std::vector<double> sorted(row, row + prefix_len);
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double mass = 0.0;
    int count = 0;
    for (int i = 0; i < prefix_len; ++i) {
        mass += sorted[size_t(i)];
        ++count;
        if (mass >= 0.90) {
            break;
        }
    }
    return 100.0 * double(count) / double(prefix_len);
}

namespace {

// log-softmax probability of one token from a logits row, in double
double token_log_prob(const float* logits, int n, int token) {
    double mx = logits[0];
    for (int i = 1; i < n; ++i) {
        mx = std::max(mx, double(logits[i]));
    }
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        sum += std::exp(double(logits[i]) - mx);
    }
    return (double(logits[token]) - mx) - std::log(sum);
}

// full output distribution in double precision (metric computations never use
// the float-normalized probabilities)
std::vector<double> output_distribution(const float* logits, int n) {
    double mx = logits[0];
    for (int i = 1; i < n; ++i) {
        mx = std::max(mx, double(logits[i]));
    }
    std::vector<double> probs(static_cast<size_t>(n));
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        probs[size_t(i)] = std::exp(double(logits[i]) - mx);
        sum += probs[size_t(i)];
    }
    for (auto& p : probs) {
        p /= sum;
    }
    return probs;
}

MixedSequence bos_instantiate(const Vocab& vocab, const Template& tmpl,
                              const std::string& subject) {
    MixedSequence seq;
    seq.push_token(vocab.bos_id());
    MixedSequence inst = instantiate(tmpl, subject, vocab);
    for (auto& e : inst.elems) {
        seq.elems.push_back(std::move(e));
    }
    return seq;
}

} // namespace

double sequence_perplexity(const Parameters<float>& params, const Vocab& vocab,
                           const Template& tmpl, const std::string& subject) {
    require(tmpl.type != PromptType::m_cont, ErrorKind::unsupported,
            "perplexity is not defined for continuous templates");
    const MixedSequence seq = bos_instantiate(vocab, tmpl, subject);

    Workspace<float> ws;
    forward_ws(params, seq, ws);
    double nll = 0.0;
    const int scored = seq.length() - 1; // every element after the BOS
    for (int t = 0; t < scored; ++t) {
        nll -= token_log_prob(ws.logits.row(t), params.config.vocab_size,
                              seq.elems[size_t(t + 1)].token);
    }
    return std::exp(nll / double(scored));
}

double activation_overlap(const ActivationMatrix& a, const ActivationMatrix& b) {
    require(a.layers == b.layers && a.units_per_layer == b.units_per_layer, ErrorKind::shape,
            "activation matrices have different shapes");
    size_t inter = 0;
    size_t uni = 0;
    for (size_t i = 0; i < a.active.size(); ++i) {
        const bool x = a.active[i] != 0;
        const bool y = b.active[i] != 0;
        inter += x && y;
        uni += x || y;
    }
    return uni == 0 ? 1.0 : double(inter) / double(uni);
}

namespace {

std::vector<double> mean_payload_embedding(const Parameters<float>& params, const Vocab& vocab,
                                           const Template& tmpl) {
    const int d = params.config.model_dim;
    std::vector<double> mean(size_t(d), 0.0);
    int n = 0;
    if (tmpl.type == PromptType::m_cont) {
        for (int r = 0; r < tmpl.payload_vectors.rows; ++r) {
            const float* v = tmpl.payload_vectors.row(r);
            for (int i = 0; i < d; ++i) {
                mean[size_t(i)] += double(v[i]);
            }
            ++n;
        }
    } else {
        for (const auto& tok : tmpl.payload_tokens) {
            const float* e = params.tok_emb.row(vocab.id(tok));
            for (int i = 0; i < d; ++i) {
                mean[size_t(i)] += double(e[i]);
            }
            ++n;
        }
    }
    require(n > 0, ErrorKind::data, "template has an empty payload: " + tmpl.id);
    for (auto& m : mean) {
        m /= double(n);
    }
    return mean;
}

} // namespace

double input_similarity(const Parameters<float>& params, const Vocab& vocab, const Template& a,
                        const Template& b) {
    const auto va = mean_payload_embedding(params, vocab, a);
    const auto vb = mean_payload_embedding(params, vocab, b);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < va.size(); ++i) {
        dot += va[i] * vb[i];
        na += va[i] * va[i];
        nb += vb[i] * vb[i];
    }
    require(na > 0.0 && nb > 0.0, ErrorKind::undefined,
            "cosine similarity undefined for a zero embedding");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double output_agreement(const std::vector<EvalRecord>& records_a,
                        const std::vector<EvalRecord>& records_b) {
    require(!records_a.empty() && records_a.size() == records_b.size(), ErrorKind::data,
            "output agreement needs aligned record lists");
    size_t same = 0;
    for (size_t i = 0; i < records_a.size(); ++i) {
        require(records_a[i].subject == records_b[i].subject, ErrorKind::data,
                "output agreement: record lists are not subject-aligned");
        same += records_a[i].predicted == records_b[i].predicted;
    }
    return double(same) / double(records_a.size());
}

// ---------------------------------------------------------------------------
// Evaluation driver
// ---------------------------------------------------------------------------

std::vector<EvalRecord> evaluate_template(const Parameters<float>& params, const Vocab& vocab,
                                          const Template& tmpl,
                                          const std::vector<Triplet>& triplets) {
    std::vector<EvalRecord> out;
    const int vocab_size = params.config.vocab_size;

    for (const auto& tr : triplets) {
        if (tr.relation_id != tmpl.relation_id) {
            continue;
        }
        const MixedSequence seq = bos_instantiate(vocab, tmpl, tr.subject);
        const ForwardTrace<float> trace = forward(params, seq);
        const int last = seq.length() - 1;

        EvalRecord rec;
        rec.template_id = tmpl.id;
        rec.relation_id = tmpl.relation_id;
        rec.type = tmpl.type;
        rec.subject = tr.subject;
        rec.object = tr.object;

        const std::vector<double> probs = output_distribution(trace.logits.row(last), vocab_size);
        const int pred = argmax_lowest(probs.data(), vocab_size);
        rec.predicted = vocab.token(pred);
        rec.correct = rec.predicted == tr.object;
        rec.entropy_nats = output_entropy_nats(probs);
        rec.entropy_bits = nats_to_bits(rec.entropy_nats);
        rec.attention_spread_pct = attention_spread_percent(trace);

        if (tmpl.type != PromptType::m_cont) {
            double nll = 0.0;
            for (int t = 0; t < last; ++t) {
                nll -= token_log_prob(trace.logits.row(t), vocab_size,
                                      seq.elems[size_t(t + 1)].token);
            }
            rec.perplexity = std::exp(nll / double(last));
        }

        rec.unit_activations.reserve(trace.units.size());
        for (const auto& layer_units : trace.units) {
            rec.unit_activations.emplace_back(layer_units.row(last),
                                              layer_units.row(last) + layer_units.cols);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

ActivationMatrix activation_matrix_from_records(const std::vector<EvalRecord>& records, double k) {
    require(!records.empty(), ErrorKind::data, "activation matrix from an empty record list");
    const int layers = int(records.front().unit_activations.size());
    const int units = layers > 0 ? int(records.front().unit_activations.front().size()) : 0;
    require(layers > 0 && units > 0, ErrorKind::data, "records carry no unit activations");

    ActivationMatrix mat;
    mat.template_id = records.front().template_id;
    mat.layers = layers;
    mat.units_per_layer = units;
    mat.active.assign(size_t(layers) * size_t(units), 0);

    const double threshold = k * double(records.size()); // strict >
    std::vector<int> counts(size_t(layers) * size_t(units), 0);
    for (const auto& rec : records) {
        for (int l = 0; l < layers; ++l) {
            const auto& row = rec.unit_activations[size_t(l)];
            for (int u = 0; u < units; ++u) {
                counts[size_t(l) * size_t(units) + size_t(u)] += row[size_t(u)] > 0.0f;
            }
        }
    }
    for (size_t i = 0; i < counts.size(); ++i) {
        mat.active[i] = double(counts[i]) > threshold ? 1 : 0;
    }
    return mat;
}

ActivationMatrix activation_matrix(const Parameters<float>& params, const Vocab& vocab,
                                   const Template& tmpl, const std::vector<Triplet>& subjects,
                                   double k) {
    std::vector<Triplet> relevant;
    for (const auto& t : subjects) {
        if (t.relation_id == tmpl.relation_id) {
            relevant.push_back(t);
        }
    }
    require(!relevant.empty(), ErrorKind::data,
            "activation matrix: no subjects for relation " + tmpl.relation_id);
    return activation_matrix_from_records(evaluate_template(params, vocab, tmpl, relevant), k);
}

double template_accuracy_from_records(const std::vector<EvalRecord>& records) {
    require(!records.empty(), ErrorKind::data, "accuracy of an empty record list");
    size_t correct = 0;
    for (const auto& r : records) {
        correct += r.correct;
    }
    return double(correct) / double(records.size());
}

MicroAccuracy micro_accuracy(const std::vector<std::vector<EvalRecord>>& records_per_template) {
    MicroAccuracy out;
    std::map<std::string, std::map<PromptType, std::vector<double>>> task_scores;
    std::map<PromptType, std::vector<double>> type_scores;

    for (const auto& records : records_per_template) {
        if (records.empty()) {
            continue;
        }
        const double acc = template_accuracy_from_records(records);
        out.per_template[records.front().template_id] = acc;
        task_scores[records.front().relation_id][records.front().type].push_back(acc);
        type_scores[records.front().type].push_back(acc);
    }

    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) {
            s += x;
        }
        return v.empty() ? 0.0 : s / double(v.size());
    };
    for (const auto& [task, per_type] : task_scores) {
        for (const auto& [type, scores] : per_type) {
            out.per_task[task][type] = mean(scores);
        }
    }
    for (const auto& [type, scores] : type_scores) {
        out.per_type[type] = mean(scores);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Uncertainty machinery
// ---------------------------------------------------------------------------

double quantile_linear(std::vector<double> values, double q) {
    require(!values.empty(), ErrorKind::data, "quantile of an empty list");
    require(q >= 0.0 && q <= 1.0, ErrorKind::domain, "quantile level outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = q * double(values.size() - 1);
    const size_t lo = size_t(std::floor(h));
    if (lo + 1 >= values.size()) {
        return values.back();
    }
    const double frac = h - double(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

Ci quantile_ci(const std::vector<double>& scores) {
    require(!scores.empty(), ErrorKind::data, "confidence interval of an empty score list");
    if (scores.size() < 2) {
        return Ci{scores.front(), scores.front()};
    }
    return Ci{quantile_linear(scores, 0.025), quantile_linear(scores, 0.975)};
}

BootstrapCi bootstrap_ci(const IndexStat& stat, size_t n_items, uint64_t seed) {
    require(n_items > 0, ErrorKind::data, "bootstrap over an empty item list");
    Rng rng(seed);
    int resamples = 200;
    constexpr int kCap = 51200;

    bool have_prev = false;
    Ci prev;
    BootstrapCi out;
    while (true) {
        std::vector<double> stats;
        stats.reserve(size_t(resamples));
        std::vector<size_t> idx(n_items);
        for (int r = 0; r < resamples; ++r) {
            for (auto& i : idx) {
                i = size_t(rng.below(uint64_t(n_items)));
            }
            const double s = stat(idx);
            if (std::isfinite(s)) {
                stats.push_back(s);
            }
        }
        require(!stats.empty(), ErrorKind::data,
                "bootstrap statistic undefined on every resample");
        const Ci ci = quantile_ci(stats);
        out = BootstrapCi{ci.lo, ci.hi, resamples};

        if (have_prev) {
            auto rel = [](double a, double b) {
                return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
            };
            if (rel(prev.lo, ci.lo) < 0.01 && rel(prev.hi, ci.hi) < 0.01) {
                break;
            }
        }
        if (resamples >= kCap) {
            break;
        }
        prev = ci;
        have_prev = true;
        resamples *= 2;
    }
    return out;
}

namespace {

// incomplete beta function, continued-fraction evaluation
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14;
    constexpr double kFpMin = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) {
        d = kFpMin;
    }
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) {
            d = kFpMin;
        }
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) {
            c = kFpMin;
        }
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) {
            d = kFpMin;
        }
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) {
            c = kFpMin;
        }
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) {
            break;
        }
    }
    return h;
}

double betai(double a, double b, double x) {
    if (x <= 0.0) {
        return 0.0;
    }
    if (x >= 1.0) {
        return 1.0;
    }
    const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                               a * std::log(x) + b * std::log(1.0 - x));
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return bt * betacf(a, b, x) / a;
    }
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

} // namespace

double student_t_two_sided_p(double t, int df) {
    if (df <= 0) {
        return 1.0;
    }
    return betai(0.5 * double(df), 0.5, double(df) / (double(df) + t * t));
}

PearsonResult pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    PearsonResult out;
    require(xs.size() == ys.size(), ErrorKind::shape, "pearson: length mismatch");
    const size_t n = xs.size();
    if (n < 3) {
        return out; // undefined
    }
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) {
        return out; // constant axis: correlation undefined
    }
    out.defined = true;
    out.r = sxy / std::sqrt(sxx * syy);
    out.r = std::clamp(out.r, -1.0, 1.0);
    const double denom = 1.0 - out.r * out.r;
    if (denom <= 0.0) {
        out.p_value = 0.0;
    } else {
        const double t = out.r * std::sqrt(double(n - 2) / denom);
        out.p_value = student_t_two_sided_p(t, int(n) - 2);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pairwise statistics and tables
// ---------------------------------------------------------------------------

std::string comparison_set_name(PromptType a, PromptType b) {
    if (int(b) < int(a)) {
        std::swap(a, b);
    }
    return std::string(prompt_type_name(a)) + "_vs_" + prompt_type_name(b);
}

std::vector<PairStat> build_pair_stats(
    const Parameters<float>& params, const Vocab& vocab, const std::vector<Template>& templates,
    const std::map<std::string, std::vector<EvalRecord>>& records_by_template,
    const std::map<std::string, ActivationMatrix>& matrices_by_template) {
    // stable ordering: templates sorted by id within each relation
    std::map<std::string, std::vector<const Template*>> by_relation;
    for (const auto& t : templates) {
        by_relation[t.relation_id].push_back(&t);
    }
    std::vector<PairStat> out;
    for (auto& [rel, list] : by_relation) {
        std::sort(list.begin(), list.end(),
                  [](const Template* a, const Template* b) { return a->id < b->id; });
        for (size_t i = 0; i < list.size(); ++i) {
            for (size_t j = i + 1; j < list.size(); ++j) {
                const Template& a = *list[i];
                const Template& b = *list[j];
                PairStat ps;
                ps.relation_id = rel;
                ps.id_a = a.id;
                ps.id_b = b.id;
                ps.type_a = a.type;
                ps.type_b = b.type;
                ps.input_similarity = input_similarity(params, vocab, a, b);
                ps.output_agreement =
                    output_agreement(records_by_template.at(a.id), records_by_template.at(b.id));
                ps.activation_overlap =
                    activation_overlap(matrices_by_template.at(a.id), matrices_by_template.at(b.id));
                out.push_back(std::move(ps));
            }
        }
    }
    return out;
}

namespace {

double pair_value(const PairStat& ps, PairStatKind kind) {
    switch (kind) {
        case PairStatKind::input_similarity: return ps.input_similarity;
        case PairStatKind::output_agreement: return ps.output_agreement;
        case PairStatKind::activation_overlap: return ps.activation_overlap;
    }
    return 0.0;
}

struct SetPool {
    std::vector<std::string> template_ids; // pool for resampling
    std::vector<const PairStat*> pairs;    // all pairs of this set
    std::vector<int32_t> pair_index;       // dense [n x n] -> index into pairs, -1 if absent

    int32_t lookup(size_t i, size_t j) const {
        return pair_index[i * template_ids.size() + j];
    }
};

std::map<std::string, SetPool> pools_by_set(const std::vector<PairStat>& pair_stats) {
    std::map<std::string, SetPool> pools;
    std::map<std::string, std::set<std::string>> ids;
    for (const auto& ps : pair_stats) {
        const std::string set = comparison_set_name(ps.type_a, ps.type_b);
        pools[set].pairs.push_back(&ps);
        ids[set].insert(ps.id_a);
        ids[set].insert(ps.id_b);
    }
    for (auto& [set, pool] : pools) {
        pool.template_ids.assign(ids[set].begin(), ids[set].end());
        const size_t n = pool.template_ids.size();
        std::map<std::string, size_t> index_of;
        for (size_t i = 0; i < n; ++i) {
            index_of[pool.template_ids[i]] = i;
        }
        pool.pair_index.assign(n * n, -1);
        for (size_t p = 0; p < pool.pairs.size(); ++p) {
            const size_t a = index_of.at(pool.pairs[p]->id_a);
            const size_t b = index_of.at(pool.pairs[p]->id_b);
            pool.pair_index[a * n + b] = int32_t(p);
            pool.pair_index[b * n + a] = int32_t(p);
        }
    }
    return pools;
}

// enumerate pairs present in a resampled multiset of the pool's templates
template <typename Fn>
void for_each_resampled_pair(const SetPool& pool, const std::vector<size_t>& idx, Fn&& fn) {
    for (size_t i = 0; i < idx.size(); ++i) {
        for (size_t j = i + 1; j < idx.size(); ++j) {
            const int32_t p = pool.lookup(idx[i], idx[j]); // self-pairs are never stored
            if (p >= 0) {
                fn(*pool.pairs[size_t(p)]);
            }
        }
    }
}

} // namespace

std::vector<CorrelationCell> correlation_table(const std::vector<PairStat>& pair_stats,
                                               const std::vector<Template>& templates,
                                               uint64_t seed) {
    (void)templates;
    auto pools = pools_by_set(pair_stats);

    const struct {
        const char* name;
        PairStatKind x;
        PairStatKind y;
    } axes[] = {
        {"input_vs_output", PairStatKind::input_similarity, PairStatKind::output_agreement},
        {"input_vs_activation", PairStatKind::input_similarity, PairStatKind::activation_overlap},
        {"activation_vs_output", PairStatKind::activation_overlap, PairStatKind::output_agreement},
    };

    std::vector<CorrelationCell> out;
    for (PromptType a : kAllPromptTypes) {
        for (PromptType b : kAllPromptTypes) {
            if (int(b) < int(a)) {
                continue;
            }
            const std::string set = comparison_set_name(a, b);
            auto it = pools.find(set);
            for (const auto& axis : axes) {
                CorrelationCell cell;
                cell.comparison = set;
                cell.axes = axis.name;
                if (it == pools.end() || it->second.pairs.size() < 3) {
                    out.push_back(cell); // undefined: too few pairs
                    continue;
                }
                const SetPool& pool = it->second;
                std::vector<double> xs, ys;
                for (const PairStat* ps : pool.pairs) {
                    xs.push_back(pair_value(*ps, axis.x));
                    ys.push_back(pair_value(*ps, axis.y));
                }
                cell.n_pairs = int(pool.pairs.size());
                const PearsonResult pr = pearson(xs, ys);
                cell.defined = pr.defined;
                cell.r = pr.r;
                cell.p_value = pr.p_value;
                if (pr.defined) {
                    const IndexStat stat = [&](const std::vector<size_t>& idx) {
                        std::vector<double> rx, ry;
                        for_each_resampled_pair(pool, idx, [&](const PairStat& ps) {
                            rx.push_back(pair_value(ps, axis.x));
                            ry.push_back(pair_value(ps, axis.y));
                        });
                        const PearsonResult rr = pearson(rx, ry);
                        return rr.defined ? rr.r : std::numeric_limits<double>::quiet_NaN();
                    };
                    const uint64_t cell_seed = derive_seed(seed, set + "/" + axis.name);
                    const BootstrapCi ci =
                        bootstrap_ci(stat, pool.template_ids.size(), cell_seed);
                    cell.ci = Ci{ci.lo, ci.hi};
                    cell.resamples = ci.resamples;
                }
                out.push_back(std::move(cell));
            }
        }
    }
    return out;
}

std::vector<TypePairCell> type_pair_matrix(const std::vector<PairStat>& pair_stats,
                                           const std::vector<Template>& templates,
                                           PairStatKind kind, uint64_t seed) {
    (void)templates;
    auto pools = pools_by_set(pair_stats);

    std::vector<TypePairCell> out;
    for (PromptType a : kAllPromptTypes) {
        for (PromptType b : kAllPromptTypes) {
            if (int(b) < int(a)) {
                continue;
            }
            TypePairCell cell;
            cell.type_a = a;
            cell.type_b = b;
            const std::string set = comparison_set_name(a, b);
            auto it = pools.find(set);
            if (it == pools.end() || it->second.pairs.empty()) {
                out.push_back(cell);
                continue;
            }
            const SetPool& pool = it->second;
            double sum = 0.0;
            for (const PairStat* ps : pool.pairs) {
                sum += pair_value(*ps, kind);
            }
            cell.mean = sum / double(pool.pairs.size());
            cell.n_pairs = int(pool.pairs.size());

            const IndexStat stat = [&](const std::vector<size_t>& idx) {
                double s = 0.0;
                int n = 0;
                for_each_resampled_pair(pool, idx, [&](const PairStat& ps) {
                    s += pair_value(ps, kind);
                    ++n;
                });
                return n == 0 ? std::numeric_limits<double>::quiet_NaN() : s / double(n);
            };
            const uint64_t cell_seed = derive_seed(seed, set + "/mean" + std::to_string(int(kind)));
            const BootstrapCi ci = bootstrap_ci(stat, pool.template_ids.size(), cell_seed);
            cell.ci = Ci{ci.lo, ci.hi};
            cell.resamples = ci.resamples;
            out.push_back(std::move(cell));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Table-1-style summary
// ---------------------------------------------------------------------------

std::vector<SummaryRow> summarize_records(
    const std::map<std::string, std::vector<EvalRecord>>& records_by_template,
    const std::map<std::string, PromptType>& type_by_template) {
    // template-level scores, already averaged over the relation's subjects
    struct Scores {
        std::vector<double> accuracy, perplexity, attention, entropy_bits, entropy_nats;
    };
    std::map<PromptType, Scores> per_type;

    for (const auto& [tid, records] : records_by_template) {
        if (records.empty()) {
            continue;
        }
        const PromptType type = type_by_template.at(tid);
        double acc = 0.0, att = 0.0, ent_b = 0.0, ent_n = 0.0, ppl = 0.0;
        int n_ppl = 0;
        for (const auto& r : records) {
            acc += r.correct ? 1.0 : 0.0;
            att += r.attention_spread_pct;
            ent_b += r.entropy_bits;
            ent_n += r.entropy_nats;
            if (r.has_perplexity()) {
                ppl += r.perplexity;
                ++n_ppl;
            }
        }
        const double n = double(records.size());
        auto& s = per_type[type];
        s.accuracy.push_back(100.0 * acc / n);
        s.attention.push_back(att / n);
        s.entropy_bits.push_back(ent_b / n);
        s.entropy_nats.push_back(ent_n / n);
        if (n_ppl > 0) {
            s.perplexity.push_back(ppl / double(n_ppl));
        }
    }

    std::vector<SummaryRow> rows;
    auto emit = [&](const char* metric, PromptType type, const std::vector<double>& scores) {
        if (scores.empty()) {
            return;
        }
        SummaryRow row;
        row.metric = metric;
        row.type = type;
        double sum = 0.0;
        for (double s : scores) {
            sum += s;
        }
        row.mean = sum / double(scores.size());
        row.ci = quantile_ci(scores);
        row.n_templates = int(scores.size());
        rows.push_back(std::move(row));
    };

    for (PromptType type : kAllPromptTypes) {
        auto it = per_type.find(type);
        if (it == per_type.end()) {
            continue;
        }
        emit("accuracy", type, it->second.accuracy);
        emit("perplexity", type, it->second.perplexity); // absent for m_cont by construction
        emit("attention", type, it->second.attention);
        emit("entropy_bits", type, it->second.entropy_bits);
        emit("entropy_nats", type, it->second.entropy_nats);
    }
    return rows;
}

} // namespace plab
