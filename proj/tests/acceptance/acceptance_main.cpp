// Acceptance suite: one criterion per invocation (--criterion N) or all in
// order. Each criterion prints a single PASS/FAIL line; the exit code is the
// number of failures.
//
// Criteria 4-7 share one desk-scale pipeline run under ./plab_acceptance_run;
// the stage cache makes the expensive run happen only once.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "plab/checkpoint.hpp"
#include "plab/diagnostics.hpp"
#include "plab/induce.hpp"
#include "plab/io_util.hpp"
#include "plab/pipeline.hpp"
#include "plab/report.hpp"
#include "plab/unitprof.hpp"
#include "plab/world.hpp"

using namespace plab;
namespace fs = std::filesystem;

namespace {

double now_seconds() {
    static const auto t0 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            pass = false;
            if (!detail.empty()) {
                detail += "; ";
            }
            detail += what;
        }
    }
    void note(const std::string& what) {
        if (!detail.empty()) {
            detail += "; ";
        }
        detail += what;
    }
};

// ---------------------------------------------------------------------------
// criterion 1: metric implementations vs brute-force oracles
// ---------------------------------------------------------------------------

Outcome criterion_oracle_equivalence() {
    Outcome out;
    constexpr double kTol = 1e-9;
    constexpr int kInstances = 1000;
    Rng rng(20260808);

    // entropy
    double worst = 0.0;
    for (int k = 0; k < kInstances; ++k) {
        const int n = 2 + rng.index(64);
        std::vector<double> dist(static_cast<size_t>(n));
        double sum = 0.0;
        for (auto& p : dist) {
            p = rng.uniform01() + 1e-12;
            sum += p;
        }
        for (auto& p : dist) {
            p /= sum;
        }
        worst = std::max(worst,
                         oracle::relative_error(output_entropy_nats(dist), oracle::entropy_nats(dist)));
    }
    out.require(worst < kTol, "entropy max rel err " + fmt_g6(worst));

    // sequence perplexity on a tiny random model
    {
        std::vector<std::string> words;
        for (int i = 0; i < 50; ++i) {
            words.push_back("w" + std::to_string(i));
        }
        const Vocab vocab = Vocab::build(words);
        ModelConfig cfg;
        cfg.num_layers = 1;
        cfg.num_heads = 2;
        cfg.model_dim = 16;
        cfg.ff_dim = 32;
        cfg.vocab_size = vocab.size();
        cfg.context_length = 12;
        Rng mrng(5);
        const auto params = Parameters<float>::init_random(cfg, mrng, 0.4);

        worst = 0.0;
        for (int k = 0; k < kInstances; ++k) {
            Template tmpl;
            tmpl.id = "acc";
            tmpl.relation_id = "acc";
            tmpl.type = PromptType::m_disc;
            const int payload_len = 1 + rng.index(5);
            for (int i = 0; i < payload_len; ++i) {
                tmpl.payload_tokens.push_back(words[size_t(rng.index(words.size()))]);
            }
            const std::string subject = words[size_t(rng.index(words.size()))];

            std::vector<int> ids = {vocab.bos_id(), vocab.id(subject)};
            for (const auto& tok : tmpl.payload_tokens) {
                ids.push_back(vocab.id(tok));
            }
            const double got = sequence_perplexity(params, vocab, tmpl, subject);
            const double want = oracle::sequence_perplexity(params, ids);
            worst = std::max(worst, oracle::relative_error(got, want));
        }
        out.require(worst < kTol, "perplexity max rel err " + fmt_g6(worst));
    }

    // IoU overlap
    worst = 0.0;
    for (int k = 0; k < kInstances; ++k) {
        const int n = 1 + rng.index(96);
        std::vector<uint8_t> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            a[size_t(i)] = rng.uniform01() < 0.35;
            b[size_t(i)] = rng.uniform01() < 0.35;
        }
        ActivationMatrix ma, mb;
        ma.layers = mb.layers = 1;
        ma.units_per_layer = mb.units_per_layer = n;
        ma.active = a;
        mb.active = b;
        worst = std::max(worst,
                         oracle::relative_error(activation_overlap(ma, mb), oracle::iou(a, b)));
    }
    out.require(worst < kTol, "overlap max rel err " + fmt_g6(worst));

    // attention spread
    worst = 0.0;
    for (int k = 0; k < kInstances; ++k) {
        const int len = 1 + rng.index(32);
        std::vector<double> row(static_cast<size_t>(len));
        double sum = 0.0;
        for (auto& v : row) {
            v = rng.uniform01() + 1e-9;
            sum += v;
        }
        for (auto& v : row) {
            v /= sum;
        }
        worst = std::max(worst, oracle::relative_error(attention_row_spread_pct(row.data(), len),
                                                       oracle::attention_row_spread_pct(row)));
    }
    out.require(worst < kTol, "attention-spread max rel err " + fmt_g6(worst));

    // LMI
    worst = 0.0;
    const char* type_names[] = {"human", "m_disc", "m_cont"};
    for (int k = 0; k < kInstances; ++k) {
        FrequencyLists lists;
        std::map<std::string, std::map<std::string, int>> oracle_lists;
        for (int ti = 0; ti < 3; ++ti) {
            for (int v = 0; v < 10; ++v) {
                const int count = rng.index(5);
                if (count > 0) {
                    const std::string item = "v" + std::to_string(v);
                    lists[kAllPromptTypes[ti]][item] = count;
                    oracle_lists[type_names[ti]][item] = count;
                }
            }
        }
        bool any = false;
        for (const auto& [t, counts] : lists) {
            any = any || !counts.empty();
        }
        if (!any) {
            continue;
        }
        const auto got = lmi_rank(lists);
        for (int ti = 0; ti < 3; ++ti) {
            if (!oracle_lists.count(type_names[ti])) {
                continue;
            }
            const auto want = oracle::lmi_for_type(oracle_lists, type_names[ti]);
            std::map<std::string, double> got_map;
            for (const auto& e : got.at(kAllPromptTypes[ti])) {
                got_map[e.item] = e.lmi;
            }
            for (const auto& w : want) {
                worst = std::max(worst, oracle::relative_error(got_map.at(w.item), w.lmi));
            }
        }
    }
    out.require(worst < kTol, "LMI max rel err " + fmt_g6(worst));

    // quantile CI
    worst = 0.0;
    for (int k = 0; k < kInstances; ++k) {
        const int n = 1 + rng.index(60);
        std::vector<double> scores(static_cast<size_t>(n));
        for (auto& s : scores) {
            s = rng.gauss(0.0, 5.0);
        }
        const Ci ci = quantile_ci(scores);
        const double want_lo = n < 2 ? scores.front() : oracle::quantile(scores, 0.025);
        const double want_hi = n < 2 ? scores.front() : oracle::quantile(scores, 0.975);
        worst = std::max(worst, oracle::relative_error(ci.lo, want_lo));
        worst = std::max(worst, oracle::relative_error(ci.hi, want_hi));
    }
    out.require(worst < kTol, "quantile max rel err " + fmt_g6(worst));

    out.note("6 metrics x 1000 instances");
    return out;
}

// ---------------------------------------------------------------------------
// criterion 2: finite-difference gradient check
// ---------------------------------------------------------------------------

Outcome criterion_gradient_check() {
    Outcome out;
    ModelConfig cfg;
    cfg.num_layers = 2;
    cfg.num_heads = 4;
    cfg.model_dim = 32;
    cfg.ff_dim = 64;
    cfg.vocab_size = 60;
    cfg.context_length = 12;
    Rng mrng(99);
    auto params = Parameters<double>::init_random(cfg, mrng, 0.25);

    // mixed input: tokens plus two raw vectors
    Rng irng(7);
    MixedSequence seq;
    for (int t = 0; t < 8; ++t) {
        seq.push_token(int(irng.below(uint64_t(cfg.vocab_size))));
    }
    for (int pos : {2, 5}) {
        std::vector<double> v(static_cast<size_t>(cfg.model_dim));
        for (auto& x : v) {
            x = irng.gauss(0.0, 0.3);
        }
        seq.elems[size_t(pos)] = MixedElem{-1, std::move(v)};
    }

    const LossSpec spec{LossMode::nll, 7, 13};
    const auto res = loss_and_gradients(params, seq, spec);

    auto rel_err = [](double a, double b) {
        return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-5});
    };
    auto fd_value = [&](const std::function<void(double)>& setter, double x0) {
        const double h = 3e-5 * std::max(1.0, std::abs(x0));
        setter(x0 + h);
        const double up = loss_value(params, seq, spec);
        setter(x0 - h);
        const double down = loss_value(params, seq, spec);
        setter(x0);
        return (up - down) / (2.0 * h);
    };

    double worst = 0.0;
    int checked = 0;

    // parameters: every tensor gets sampled coordinates
    std::vector<Mat<double>*> tensors, grads;
    for_each_tensor(params, [&](const char*, Mat<double>& m) { tensors.push_back(&m); });
    for_each_tensor(const_cast<Parameters<double>&>(res.grads.grad_params),
                    [&](const char*, Mat<double>& m) { grads.push_back(&m); });
    Rng crng(1234);
    for (int k = 0; k < 60; ++k) {
        const size_t ti = crng.below(tensors.size());
        const size_t idx = crng.below(tensors[ti]->size());
        const double fd = fd_value([&](double v) { tensors[ti]->data[idx] = v; },
                                   tensors[ti]->data[idx]);
        worst = std::max(worst, rel_err(fd, grads[ti]->data[idx]));
        ++checked;
    }

    // input embeddings at the raw-vector positions
    for (int pos : {2, 5}) {
        for (int dim = 0; dim < cfg.model_dim; dim += 3) {
            auto& vec = seq.elems[size_t(pos)].vec;
            const double fd =
                fd_value([&](double v) { vec[size_t(dim)] = v; }, vec[size_t(dim)]);
            worst = std::max(worst, rel_err(fd, res.grads.grad_input.at(pos, dim)));
            ++checked;
        }
    }

    // units via post-activation injection
    for (int k = 0; k < 30; ++k) {
        const int layer = int(crng.below(uint64_t(cfg.num_layers)));
        const int pos = int(crng.below(uint64_t(seq.length())));
        const int unit = int(crng.below(uint64_t(cfg.ff_dim)));
        const double h = 3e-5;
        UnitDelta<double> ud{layer, pos, unit, h};
        const double up = loss_value(params, seq, spec, &ud);
        ud.delta = -h;
        const double down = loss_value(params, seq, spec, &ud);
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, rel_err(fd, res.grads.grad_units[size_t(layer)].at(pos, unit)));
        ++checked;
    }

    out.require(checked >= 100, "only " + std::to_string(checked) + " coordinates checked");
    out.require(worst < 1e-4, "max relative error " + fmt_g6(worst));
    out.note(std::to_string(checked) + " coordinates, max rel err " + fmt_g6(worst));
    return out;
}

// ---------------------------------------------------------------------------
// criterion 3: Eq. 1/2 instrumentation fidelity
// ---------------------------------------------------------------------------

Outcome criterion_instrumentation_fidelity() {
    Outcome out;
    double worst = 0.0;
    int traces = 0;
    Rng rng(31415);

    for (int m = 0; m < 10; ++m) {
        ModelConfig cfg;
        cfg.num_layers = 1 + rng.index(3);
        cfg.num_heads = 2;
        cfg.model_dim = 16 + 8 * rng.index(3);
        cfg.ff_dim = cfg.model_dim * 2;
        cfg.vocab_size = 40;
        cfg.context_length = 16;
        cfg.nonlinearity = m % 2 == 0 ? Nonlinearity::relu : Nonlinearity::gelu;
        Rng mrng(100 + uint64_t(m));
        const auto params = Parameters<float>::init_random(cfg, mrng, 0.4);

        for (int i = 0; i < 20; ++i) {
            const int len = 2 + rng.index(12);
            std::vector<int> ids;
            for (int t = 0; t < len; ++t) {
                ids.push_back(int(rng.below(uint64_t(cfg.vocab_size))));
            }
            const auto trace = forward(params, MixedSequence::from_tokens(ids));
            worst = std::max(worst, ffn_reconstruction_error(params, trace));
            ++traces;
        }
    }

    // the desk-scale checkpoint, when present from criterion 4's run
    const fs::path ckpt = fs::path("plab_acceptance_run") / "checkpoints" / "model.ckpt";
    if (fs::exists(ckpt)) {
        const auto params = load_checkpoint(ckpt);
        for (int i = 0; i < 10; ++i) {
            std::vector<int> ids;
            const int len = 2 + rng.index(10);
            for (int t = 0; t < len; ++t) {
                ids.push_back(int(rng.below(uint64_t(params.config.vocab_size))));
            }
            const auto trace = forward(params, MixedSequence::from_tokens(ids));
            worst = std::max(worst, ffn_reconstruction_error(params, trace));
            ++traces;
        }
    }

    out.require(worst < 1e-5, "max reconstruction error " + fmt_g6(worst));
    out.note(std::to_string(traces) + " traced forwards, max err " + fmt_g6(worst));
    return out;
}

// ---------------------------------------------------------------------------
// desk-scale run shared by criteria 4-7
// ---------------------------------------------------------------------------

PipelineConfig desk_config() {
    PipelineConfig c = PipelineConfig::defaults();
    c.seed = 42;
    c.out_dir = "plab_acceptance_run";
    c.induce.num_seeds = 3; // >= 3 template seeds per method and task
    return c;
}

const RunPaths& desk_run() {
    static const RunPaths paths = [] {
        const PipelineConfig config = desk_config();
        run_pipeline(config);
        return RunPaths{config.out_dir};
    }();
    return paths;
}

std::map<std::string, std::map<std::string, double>> summary_means(const RunPaths& paths) {
    // metric -> type -> mean
    const CsvTable table = read_csv(paths.reports_dir() / "summary.csv");
    const int metric_col = table.column("metric");
    const int type_col = table.column("type");
    const int mean_col = table.column("mean");
    std::map<std::string, std::map<std::string, double>> out;
    for (const auto& row : table.rows) {
        out[row[size_t(metric_col)]][row[size_t(type_col)]] =
            std::stod(row[size_t(mean_col)]);
    }
    return out;
}

Outcome criterion_desk_scale_main_result() {
    Outcome out;
    const double t_start = now_seconds();
    const PipelineConfig config = desk_config();

    // tiny-model bounds hold by construction; assert them anyway
    out.require(config.model.num_layers <= 4, "model exceeds 4 layers");
    out.require(config.model.model_dim <= 128, "model dim exceeds 128");
    out.require(config.model.ff_dim <= 512, "ff dim exceeds 512");
    out.require(config.induce.num_seeds >= 3, "fewer than 3 induction seeds");

    const RunPaths& paths = desk_run();

    const Vocab vocab = Vocab::load(paths.vocab_txt());
    out.require(vocab.size() <= 2048, "vocabulary exceeds 2048 types");

    // training gate: best held-out human template above 30% on >= 5 relations
    const auto params = load_checkpoint(paths.checkpoint());
    const TaskData tasks = task_data_from_files(paths.train_tsv(), paths.test_tsv());
    const auto humans = read_templates(paths.human_templates());
    int good_relations = 0;
    for (const auto& task : tasks.relations) {
        double best = 0.0;
        for (const auto& h : humans) {
            if (h.relation_id == task.relation_id) {
                best = std::max(best, template_accuracy(params, vocab, h, task.test));
            }
        }
        good_relations += best > 0.30;
    }
    out.require(good_relations >= 5, "only " + std::to_string(good_relations) +
                                         " relations with a human template above 30%");

    // aggregation breadth: machine templates span >= 5 relations x >= 3 seeds
    const auto retained = read_templates(paths.retained_templates());
    for (PromptType type : {PromptType::m_disc, PromptType::m_cont}) {
        std::set<std::string> relations;
        std::set<uint64_t> seeds;
        for (const auto& t : retained) {
            if (t.type == type) {
                relations.insert(t.relation_id);
                seeds.insert(t.seed);
            }
        }
        out.require(relations.size() >= 5, std::string(prompt_type_name(type)) +
                                               " retained in only " +
                                               std::to_string(relations.size()) + " relations");
        out.require(seeds.size() >= 3, std::string(prompt_type_name(type)) + " spans only " +
                                           std::to_string(seeds.size()) + " seeds");
    }

    const auto means = summary_means(paths);
    const double human_acc = means.at("accuracy").at("human");
    const double cont_acc = means.at("accuracy").at("m_cont");
    const double human_ppl = means.at("perplexity").at("human");
    const double disc_ppl = means.at("perplexity").at("m_disc");

    out.require(cont_acc >= human_acc, "m_cont accuracy " + fmt_g6(cont_acc) +
                                           " below human " + fmt_g6(human_acc));
    out.require(disc_ppl > human_ppl, "m_disc perplexity " + fmt_g6(disc_ppl) +
                                          " not above human " + fmt_g6(human_ppl));

    const double elapsed = now_seconds() - t_start;
    out.require(elapsed < 7200.0, "runtime exceeded 2 hours");
    out.note("human acc " + fmt_g6(human_acc) + "% vs m_cont " + fmt_g6(cont_acc) +
             "%; ppl human " + fmt_g6(human_ppl) + " vs m_disc " + fmt_g6(disc_ppl) + "; " +
             std::to_string(good_relations) + " relations above gate");
    return out;
}

Outcome criterion_random_init_control() {
    Outcome out;
    const RunPaths& paths = desk_run();
    const CsvTable table = read_csv(paths.reports_dir() / "control.csv");
    const int method_col = table.column("method");
    const int acc_col = table.column("accuracy");
    const int maj_col = table.column("majority_class_freq");

    int disc_rows = 0, cont_rows = 0;
    for (const auto& row : table.rows) {
        const double acc = std::stod(row[size_t(acc_col)]);
        const double majority = std::stod(row[size_t(maj_col)]);
        if (row[size_t(method_col)] == "m_disc") {
            ++disc_rows;
            out.require(acc <= majority + 1e-12, "m_disc control accuracy " + fmt_g6(acc) +
                                                     " above majority " + fmt_g6(majority));
        } else {
            ++cont_rows;
            out.require(acc <= majority + 0.02 + 1e-12,
                        "m_cont control accuracy " + fmt_g6(acc) + " above majority+2pts " +
                            fmt_g6(majority));
        }
    }
    out.require(disc_rows >= 3 && cont_rows >= 3, "control report too small");
    out.note(std::to_string(disc_rows) + " discrete and " + std::to_string(cont_rows) +
             " continuous control rows within bounds");
    return out;
}

Outcome criterion_overlap_structure() {
    Outcome out;
    const RunPaths& paths = desk_run();
    const LabeledMatrix mean =
        read_labeled_matrix(paths.reports_dir() / "heatmap_overlap_mean.csv");

    auto idx = [&](const std::string& label) {
        for (size_t i = 0; i < mean.labels.size(); ++i) {
            if (mean.labels[i] == label) {
                return int(i);
            }
        }
        out.require(false, "missing heatmap label " + label);
        return 0;
    };
    const int h = idx("human");
    const int c = idx("m_cont");
    const double within_human = mean.values.at(h, h);
    const double within_cont = mean.values.at(c, c);
    const double cross = mean.values.at(h, c);

    out.require(within_human > cross, "within-human overlap " + fmt_g6(within_human) +
                                          " not above human/m_cont " + fmt_g6(cross));
    out.require(within_cont > cross, "within-m_cont overlap " + fmt_g6(within_cont) +
                                         " not above human/m_cont " + fmt_g6(cross));
    out.note("within human " + fmt_g6(within_human) + ", within m_cont " + fmt_g6(within_cont) +
             ", cross " + fmt_g6(cross));
    return out;
}

Outcome criterion_probe_separability() {
    Outcome out;
    const RunPaths& paths = desk_run();
    const CsvTable table = read_csv(paths.reports_dir() / "probes.csv");
    const int layer_col = table.column("layer");
    const int pair_col = table.column("pair");
    const int mean_col = table.column("mean_accuracy");
    const int runs_col = table.column("runs");

    int layers_seen = 0;
    double min_acc = 1.0;
    for (const auto& row : table.rows) {
        if (row[size_t(pair_col)] != "human_vs_m_cont") {
            continue;
        }
        ++layers_seen;
        const double acc = std::stod(row[size_t(mean_col)]);
        min_acc = std::min(min_acc, acc);
        out.require(acc > 0.60, "layer " + row[size_t(layer_col)] + " mean accuracy " +
                                    fmt_g6(acc) + " not above 60%");
        out.require(std::stoi(row[size_t(runs_col)]) == 20,
                    "layer " + row[size_t(layer_col)] + " does not have 20 runs");
    }
    out.require(layers_seen >= 1, "no human_vs_m_cont probe rows");
    out.note(std::to_string(layers_seen) + " layers, min mean accuracy " + fmt_g6(min_acc) +
             " vs 0.50 balanced baseline");
    return out;
}

// ---------------------------------------------------------------------------
// criterion 8: stage determinism
// ---------------------------------------------------------------------------

Outcome criterion_determinism() {
    Outcome out;
    PipelineConfig config = PipelineConfig::defaults();
    config.seed = 77;
    config.world.num_relations = 4;
    config.world.entities_per_relation = 10;
    config.world.objects_per_relation = 4;
    config.model.num_layers = 2;
    config.model.num_heads = 2;
    config.model.model_dim = 24;
    config.model.ff_dim = 48;
    config.train.max_steps = 400;
    config.stop.target_relations = 3;
    config.induce.num_seeds = 2;
    config.induce.disc_steps = 8;
    config.induce.cont_steps = 50;
    config.induce.candidate_pool = 10;
    config.induce.batch_size = 6;
    config.induce.control_model_seeds = 1;
    config.profile.window = 12;
    config.profile.stride = 12;
    config.probe.subjects_per_template = 4;

    const fs::path base = "plab_determinism_run";
    fs::remove_all(base);
    config.out_dir = base / "a";
    run_pipeline(config);
    const RunPaths pa{config.out_dir};

    auto report_bytes = [](const RunPaths& paths) {
        std::map<std::string, std::string> bytes;
        for (const auto& entry : fs::recursive_directory_iterator(paths.reports_dir())) {
            if (entry.is_regular_file()) {
                bytes[fs::relative(entry.path(), paths.reports_dir()).string()] =
                    read_text_file(entry.path());
            }
        }
        return bytes;
    };
    const auto first = report_bytes(pa);
    out.require(!first.empty(), "no report files produced");

    // force every stage from diagnose on to re-execute with the same manifest
    for (const char* stage : {"diagnose", "profile-units", "probe", "report"}) {
        fs::remove(pa.stamp(stage));
    }
    fs::remove(pa.reports_dir() / "summary.csv");
    run_pipeline(config);
    const auto rerun = report_bytes(pa);
    out.require(first.size() == rerun.size(), "report file set changed across rerun");
    for (const auto& [name, bytes] : first) {
        auto it = rerun.find(name);
        out.require(it != rerun.end() && it->second == bytes,
                    "report file differs after stage rerun: " + name);
        if (!out.pass) {
            break;
        }
    }

    // a sibling run from the same manifest reproduces every report byte
    PipelineConfig twin = config;
    twin.out_dir = base / "b";
    run_pipeline(twin);
    const auto second = report_bytes(RunPaths{twin.out_dir});
    out.require(first.size() == second.size(), "sibling run produced different report set");
    for (const auto& [name, bytes] : first) {
        auto it = second.find(name);
        out.require(it != second.end() && it->second == bytes,
                    "report file differs across run directories: " + name);
        if (!out.pass) {
            break;
        }
    }

    out.note(std::to_string(first.size()) + " report files byte-identical across reruns");
    fs::remove_all(base);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            only = std::atoi(argv[i + 1]);
        }
    }

    struct Entry {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Entry> criteria = {
        {1, "oracle equivalence", criterion_oracle_equivalence},
        {2, "gradient correctness", criterion_gradient_check},
        {3, "instrumentation fidelity", criterion_instrumentation_fidelity},
        {4, "desk-scale main result", criterion_desk_scale_main_result},
        {5, "random-initialization control", criterion_random_init_control},
        {6, "overlap structure", criterion_overlap_structure},
        {7, "probe separability", criterion_probe_separability},
        {8, "determinism", criterion_determinism},
    };

    int failures = 0;
    for (const auto& entry : criteria) {
        if (only != 0 && entry.id != only) {
            continue;
        }
        const double t0 = now_seconds();
        Outcome outcome;
        try {
            outcome = entry.run();
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.detail = std::string("exception: ") + e.what();
        }
        const double secs = now_seconds() - t0;
        std::printf("criterion %d (%s): %s [%.1fs] %s\n", entry.id, entry.name,
                    outcome.pass ? "PASS" : "FAIL", secs, outcome.detail.c_str());
        std::fflush(stdout);
        failures += outcome.pass ? 0 : 1;
    }
    return failures;
}
