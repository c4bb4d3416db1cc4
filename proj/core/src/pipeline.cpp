#include "plab/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <set>

#include "json.hpp"
#include "plab/checkpoint.hpp"
#include "plab/hash.hpp"
#include "plab/io_util.hpp"
#include "plab/report.hpp"
#include "plab/svgplot.hpp"
#include "plab/unitprof.hpp"

namespace plab {

namespace {

constexpr const char* kVersion = "0.3.0";

// one version stamp per module, recorded in the manifest
const std::pair<const char*, const char*> kModuleVersions[] = {
    {"reflm", kVersion},    {"corpusgen", kVersion}, {"tasks", kVersion},
    {"induce", kVersion},   {"diagnostics", kVersion}, {"unitprof", kVersion},
    {"probes", kVersion},   {"cli", kVersion},
};

} // namespace

PipelineConfig PipelineConfig::defaults() {
    PipelineConfig cfg;
    cfg.world.seed = cfg.seed;
    cfg.train.max_steps = 4000;
    cfg.train.eval_every = 100;
    return cfg;
}

PipelineConfig PipelineConfig::from_config(const ConfigFile& f) {
    PipelineConfig c = defaults();
    c.seed = f.get_u64("run", "seed", c.seed);
    c.out_dir = f.get("run", "out_dir", c.out_dir.string());

    c.world.num_relations = f.get_int("world", "num_relations", c.world.num_relations);
    c.world.entities_per_relation =
        f.get_int("world", "entities_per_relation", c.world.entities_per_relation);
    c.world.objects_per_relation =
        f.get_int("world", "objects_per_relation", c.world.objects_per_relation);
    c.world.surface_forms_per_relation =
        f.get_int("world", "surface_forms_per_relation", c.world.surface_forms_per_relation);
    c.world.eval_forms_per_relation =
        f.get_int("world", "eval_forms_per_relation", c.world.eval_forms_per_relation);
    c.world.corpus_repetitions =
        f.get_int("world", "corpus_repetitions", c.world.corpus_repetitions);
    c.world.filler_ratio = f.get_double("world", "filler_ratio", c.world.filler_ratio);
    c.world.train_fraction = f.get_double("world", "train_fraction", c.world.train_fraction);
    c.world.seed = f.get_u64("world", "seed", c.seed);

    c.model.num_layers = f.get_int("model", "num_layers", c.model.num_layers);
    c.model.num_heads = f.get_int("model", "num_heads", c.model.num_heads);
    c.model.model_dim = f.get_int("model", "model_dim", c.model.model_dim);
    c.model.ff_dim = f.get_int("model", "ff_dim", c.model.ff_dim);
    c.model.context_length = f.get_int("model", "context_length", c.model.context_length);
    c.model.nonlinearity = nonlinearity_from_name(
        f.get("model", "nonlinearity", nonlinearity_name(c.model.nonlinearity)));

    c.train.max_steps = f.get_int("train", "max_steps", c.train.max_steps);
    c.train.batch_size = f.get_int("train", "batch_size", c.train.batch_size);
    c.train.learning_rate = f.get_double("train", "learning_rate", c.train.learning_rate);
    c.train.weight_init_std = f.get_double("train", "weight_init_std", c.train.weight_init_std);
    c.train.grad_clip = f.get_double("train", "grad_clip", c.train.grad_clip);
    c.train.eval_every = f.get_int("train", "eval_every", c.train.eval_every);

    c.stop.target_accuracy = f.get_double("stop", "target_accuracy", c.stop.target_accuracy);
    c.stop.target_relations = f.get_int("stop", "target_relations", c.stop.target_relations);

    c.induce.template_len = f.get_int("induce", "template_len", c.induce.template_len);
    c.induce.disc_steps = f.get_int("induce", "disc_steps", c.induce.disc_steps);
    c.induce.cont_steps = f.get_int("induce", "cont_steps", c.induce.cont_steps);
    c.induce.candidate_pool = f.get_int("induce", "candidate_pool", c.induce.candidate_pool);
    c.induce.batch_size = f.get_int("induce", "batch_size", c.induce.batch_size);
    c.induce.cont_learning_rate =
        f.get_double("induce", "cont_learning_rate", c.induce.cont_learning_rate);
    c.induce.num_seeds = f.get_int("induce", "num_seeds", c.induce.num_seeds);
    c.induce.control_model_seeds =
        f.get_int("induce", "control_model_seeds", c.induce.control_model_seeds);
    c.induce.method = f.get("induce", "method", c.induce.method);
    c.induce.only_task = f.get("induce", "only_task", c.induce.only_task);
    c.run_control = f.get_bool("induce", "run_control", c.run_control);

    c.filter_threshold = f.get_double("filter", "threshold", c.filter_threshold);
    c.diagnostics.activation_k =
        f.get_double("diagnostics", "activation_k", c.diagnostics.activation_k);

    c.profile.top_fraction = f.get_double("profile", "top_fraction", c.profile.top_fraction);
    c.profile.bottom_fraction =
        f.get_double("profile", "bottom_fraction", c.profile.bottom_fraction);
    c.profile.saliency_fraction =
        f.get_double("profile", "saliency_fraction", c.profile.saliency_fraction);
    c.profile.window = f.get_int("profile", "window", c.profile.window);
    c.profile.stride = f.get_int("profile", "stride", c.profile.stride);
    c.profile.saliency_sample = f.get_int("profile", "saliency_sample", c.profile.saliency_sample);
    c.profile.items_cap = f.get_int("profile", "items_cap", c.profile.items_cap);
    c.profile.lmi_top = f.get_int("profile", "lmi_top", c.profile.lmi_top);

    c.probe.alpha = f.get_double("probe", "alpha", c.probe.alpha);
    c.probe.epochs = f.get_int("probe", "epochs", c.probe.epochs);
    c.probe.learning_rate = f.get_double("probe", "learning_rate", c.probe.learning_rate);
    c.probe.seeds = f.get_int("probe", "seeds", c.probe.seeds);
    c.probe.subjects_per_template =
        f.get_int("probe", "subjects_per_template", c.probe.subjects_per_template);
    c.probe.partitions = f.get_int("probe", "partitions", c.probe.partitions);
    return c;
}

ConfigFile PipelineConfig::to_config() const {
    ConfigFile f;
    f.set("run", "seed", std::to_string(seed));
    f.set("run", "out_dir", out_dir.string());

    f.set("world", "num_relations", std::to_string(world.num_relations));
    f.set("world", "entities_per_relation", std::to_string(world.entities_per_relation));
    f.set("world", "objects_per_relation", std::to_string(world.objects_per_relation));
    f.set("world", "surface_forms_per_relation",
          std::to_string(world.surface_forms_per_relation));
    f.set("world", "eval_forms_per_relation", std::to_string(world.eval_forms_per_relation));
    f.set("world", "corpus_repetitions", std::to_string(world.corpus_repetitions));
    f.set("world", "filler_ratio", fmt_g6(world.filler_ratio));
    f.set("world", "train_fraction", fmt_g6(world.train_fraction));
    f.set("world", "seed", std::to_string(world.seed));

    f.set("model", "num_layers", std::to_string(model.num_layers));
    f.set("model", "num_heads", std::to_string(model.num_heads));
    f.set("model", "model_dim", std::to_string(model.model_dim));
    f.set("model", "ff_dim", std::to_string(model.ff_dim));
    f.set("model", "context_length", std::to_string(model.context_length));
    f.set("model", "nonlinearity", nonlinearity_name(model.nonlinearity));

    f.set("train", "max_steps", std::to_string(train.max_steps));
    f.set("train", "batch_size", std::to_string(train.batch_size));
    f.set("train", "learning_rate", fmt_g6(train.learning_rate));
    f.set("train", "weight_init_std", fmt_g6(train.weight_init_std));
    f.set("train", "grad_clip", fmt_g6(train.grad_clip));
    f.set("train", "eval_every", std::to_string(train.eval_every));

    f.set("stop", "target_accuracy", fmt_g6(stop.target_accuracy));
    f.set("stop", "target_relations", std::to_string(stop.target_relations));

    f.set("induce", "template_len", std::to_string(induce.template_len));
    f.set("induce", "disc_steps", std::to_string(induce.disc_steps));
    f.set("induce", "cont_steps", std::to_string(induce.cont_steps));
    f.set("induce", "candidate_pool", std::to_string(induce.candidate_pool));
    f.set("induce", "batch_size", std::to_string(induce.batch_size));
    f.set("induce", "cont_learning_rate", fmt_g6(induce.cont_learning_rate));
    f.set("induce", "num_seeds", std::to_string(induce.num_seeds));
    f.set("induce", "control_model_seeds", std::to_string(induce.control_model_seeds));
    f.set("induce", "method", induce.method);
    f.set("induce", "only_task", induce.only_task);
    f.set("induce", "run_control", run_control ? "true" : "false");

    f.set("filter", "threshold", fmt_g6(filter_threshold));
    f.set("diagnostics", "activation_k", fmt_g6(diagnostics.activation_k));

    f.set("profile", "top_fraction", fmt_g6(profile.top_fraction));
    f.set("profile", "bottom_fraction", fmt_g6(profile.bottom_fraction));
    f.set("profile", "saliency_fraction", fmt_g6(profile.saliency_fraction));
    f.set("profile", "window", std::to_string(profile.window));
    f.set("profile", "stride", std::to_string(profile.stride));
    f.set("profile", "saliency_sample", std::to_string(profile.saliency_sample));
    f.set("profile", "items_cap", std::to_string(profile.items_cap));
    f.set("profile", "lmi_top", std::to_string(profile.lmi_top));

    f.set("probe", "alpha", fmt_g6(probe.alpha));
    f.set("probe", "epochs", std::to_string(probe.epochs));
    f.set("probe", "learning_rate", fmt_g6(probe.learning_rate));
    f.set("probe", "seeds", std::to_string(probe.seeds));
    f.set("probe", "subjects_per_template", std::to_string(probe.subjects_per_template));
    f.set("probe", "partitions", std::to_string(probe.partitions));
    return f;
}

std::string PipelineConfig::manifest_text() const {
    ConfigFile f = to_config();
    f.set("run", "out_dir", "<relocatable>"); // moving a run dir must not invalidate it

    std::string out;
    out += "plab-run-manifest v1\n";
    out += "project-version = " + std::string(kVersion) + "\n";
    out += "root-seed = " + std::to_string(seed) + "\n";
    out += "\n[module-versions]\n";
    for (const auto& [module, version] : kModuleVersions) {
        out += std::string(module) + " = " + version + "\n";
    }
    out += "\n[decisions-in-force]\n";
    out += "argmax ties break to the lowest token id\n";
    out += "unit activation is read at the final input position (the prediction position)\n";
    out += "within-type pair averages exclude self-pairs\n";
    out += "summary averaging order: subject -> relation -> template; type mean pools templates\n";
    out += "output entropy is reported in both bits and nats\n";
    out += "a BOS token is prepended to every evaluated sequence; perplexity scores subject and "
           "template tokens conditioned on it\n";
    out += "machine template ids carry the per-job seed index; payload init: filler token "
           "(discrete), embedding-table moment match (continuous)\n";
    out += "continuous optimization: plain gradient descent, fixed step, best iterate returned\n";
    out += "layer histogram measure: activation frequency (share of evaluations with unit value "
           "> 0)\n";
    out += "saliency pools all prompt types: mean |d p_max / d unit| at the prediction position\n";
    out += "probe features are raw unit values, standardized per feature on the training split "
           "before the fit; probe SGD uses proximal L1 steps with an inverse-scaled step size "
           "over a fixed epoch budget\n";
    out += "probe evaluation downsamples the larger class to exact balance (seeded)\n";
    out += "\n[config]\n";
    out += f.serialize();
    return out;
}

uint64_t PipelineConfig::manifest_hash() const {
    return fnv1a(manifest_text());
}

// ---------------------------------------------------------------------------
// actbits cache format
// ---------------------------------------------------------------------------

std::string sanitize_template_id(const std::string& id) {
    std::string out = id;
    for (char& c : out) {
        if (c == ':' || c == '/' || c == '\\') {
            c = '_';
        }
    }
    return out;
}

void write_actbits(const std::filesystem::path& path, const ActBitsCache& cache) {
    const size_t cells = size_t(cache.layers) * size_t(cache.units_per_layer);
    std::string out;
    out += "plab-actbits v1\n";
    out += "template = " + cache.template_id + "\n";
    out += "layers = " + std::to_string(cache.layers) + "\n";
    out += "units_per_layer = " + std::to_string(cache.units_per_layer) + "\n";
    out += "subjects = " + std::to_string(cache.per_subject.size()) + "\n";
    out += "end-header\n";

    auto pack = [&](const std::vector<uint8_t>& flags) {
        require(flags.size() == cells, ErrorKind::shape, "actbits row size mismatch");
        for (size_t base = 0; base < cells; base += 8) {
            uint8_t byte = 0;
            for (size_t bit = 0; bit < 8 && base + bit < cells; ++bit) {
                byte |= uint8_t((flags[base + bit] != 0) << bit);
            }
            out.push_back(char(byte));
        }
    };
    for (const auto& row : cache.per_subject) {
        pack(row);
    }
    pack(cache.aggregated.active);
    write_text_file(path, out);
}

ActBitsCache read_actbits(const std::filesystem::path& path) {
    const std::string bytes = read_text_file(path);
    size_t offset = 0;
    auto next_line = [&]() {
        const size_t nl = bytes.find('\n', offset);
        require(nl != std::string::npos, ErrorKind::io, "truncated actbits header");
        std::string line = bytes.substr(offset, nl - offset);
        offset = nl + 1;
        return line;
    };
    require(next_line() == "plab-actbits v1", ErrorKind::io,
            "not an actbits file: " + path.string());

    ActBitsCache cache;
    size_t subjects = 0;
    while (true) {
        const std::string line = next_line();
        if (line == "end-header") {
            break;
        }
        const size_t eq = line.find(" = ");
        require(eq != std::string::npos, ErrorKind::io, "malformed actbits header: " + line);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 3);
        if (key == "template") {
            cache.template_id = value;
        } else if (key == "layers") {
            cache.layers = std::stoi(value);
        } else if (key == "units_per_layer") {
            cache.units_per_layer = std::stoi(value);
        } else if (key == "subjects") {
            subjects = size_t(std::stoul(value));
        }
    }

    const size_t cells = size_t(cache.layers) * size_t(cache.units_per_layer);
    const size_t row_bytes = (cells + 7) / 8;
    auto unpack = [&]() {
        require(offset + row_bytes <= bytes.size(), ErrorKind::io, "truncated actbits payload");
        std::vector<uint8_t> flags(cells, 0);
        for (size_t i = 0; i < cells; ++i) {
            const uint8_t byte = uint8_t(bytes[offset + i / 8]);
            flags[i] = (byte >> (i % 8)) & 1;
        }
        offset += row_bytes;
        return flags;
    };
    for (size_t s = 0; s < subjects; ++s) {
        cache.per_subject.push_back(unpack());
    }
    cache.aggregated.template_id = cache.template_id;
    cache.aggregated.layers = cache.layers;
    cache.aggregated.units_per_layer = cache.units_per_layer;
    cache.aggregated.active = unpack();
    require(offset == bytes.size(), ErrorKind::io, "actbits has trailing bytes");
    return cache;
}

// ---------------------------------------------------------------------------
// shared stage loaders
// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<int>> load_corpus_ids(const RunPaths& paths, const Vocab& vocab) {
    std::vector<std::vector<int>> out;
    for (const auto& line : read_lines(paths.corpus_txt())) {
        if (!line.empty()) {
            out.push_back(vocab.encode_line(line));
        }
    }
    return out;
}

TaskData load_tasks(const RunPaths& paths) {
    return task_data_from_files(paths.train_tsv(), paths.test_tsv());
}

std::vector<Template> load_all_templates(const RunPaths& paths) {
    std::vector<Template> all = read_templates(paths.human_templates());
    for (auto& t : read_templates(paths.disc_templates())) {
        all.push_back(std::move(t));
    }
    for (auto& t : read_templates(paths.cont_templates())) {
        all.push_back(std::move(t));
    }
    return all;
}

// ---------------------------------------------------------------------------
// stage bodies
// ---------------------------------------------------------------------------

void stage_gen_corpus(const PipelineConfig& config, const RunPaths& paths) {
    const World world = generate_world(config.world);
    const Corpus corpus = render_corpus(world);

    std::string corpus_text;
    for (const auto& line : corpus.lines) {
        for (size_t i = 0; i < line.size(); ++i) {
            if (i) {
                corpus_text += ' ';
            }
            corpus_text += line[i];
        }
        corpus_text += '\n';
    }
    write_text_file(paths.corpus_txt(), corpus_text);

    const std::vector<Template> humans = human_templates(world);
    std::vector<std::string> tokens = corpus.all_tokens();
    for (const auto& t : humans) {
        tokens.insert(tokens.end(), t.payload_tokens.begin(), t.payload_tokens.end());
    }
    Vocab::build(tokens).save(paths.vocab_txt());

    std::vector<Triplet> facts;
    for (const auto& f : world.facts) {
        facts.push_back(Triplet{world.relations[size_t(f.relation_index)].id, f.subject, f.object});
    }
    write_triplets(paths.facts_tsv(), facts);
    write_triplets(paths.train_tsv(), corpus.train_triplets);
    write_triplets(paths.test_tsv(), corpus.test_triplets);
    write_templates(paths.human_templates(), humans);
}

void stage_train_ref(const PipelineConfig& config, const RunPaths& paths) {
    const Vocab vocab = Vocab::load(paths.vocab_txt());
    const auto corpus_ids = load_corpus_ids(paths, vocab);
    const TaskData tasks = load_tasks(paths);
    const auto humans = read_templates(paths.human_templates());

    ModelConfig model_config = config.model;
    model_config.vocab_size = vocab.size();
    model_config.validate();

    // stop as soon as enough relations have a held-out human template above
    // the accuracy target
    StopProbe probe = nullptr;
    if (config.train.eval_every > 0) {
        probe = [&](const Parameters<float>& params, int) {
            int good = 0;
            for (const auto& task : tasks.relations) {
                double best = 0.0;
                for (const auto& h : humans) {
                    if (h.relation_id == task.relation_id) {
                        best = std::max(best, template_accuracy(params, vocab, h, task.test));
                    }
                }
                good += best > config.stop.target_accuracy;
            }
            return good >= config.stop.target_relations;
        };
    }

    const TrainResult result = train(corpus_ids, model_config, config.train,
                                     derive_seed(config.seed, "train-ref"), vocab.bos_id(), probe);

    save_checkpoint(paths.checkpoint(), result.params);
    write_text_file(paths.checkpoint_hash(),
                    hash_hex(checkpoint_hash(result.params)) + "\n");

    std::string log = "step,loss\n";
    for (size_t i = 0; i < result.step_losses.size(); ++i) {
        log += std::to_string(i + 1) + "," + fmt_g6(result.step_losses[i]) + "\n";
    }
    write_text_file(paths.train_log(), log);
}

void stage_induce(const PipelineConfig& config, const RunPaths& paths) {
    const Vocab vocab = Vocab::load(paths.vocab_txt());
    const TaskData tasks = load_tasks(paths);
    const Parameters<float> params = load_checkpoint(paths.checkpoint());

    std::vector<Template> disc, cont;
    for (const auto& task : tasks.relations) {
        if (!config.induce.only_task.empty() && task.relation_id != config.induce.only_task) {
            continue;
        }
        for (int s = 0; s < config.induce.num_seeds; ++s) {
            if (config.induce.method != "cont") {
                const uint64_t disc_seed = derive_seed(
                    config.seed, "induce/disc/" + task.relation_id + "/s" + std::to_string(s));
                Template d = autoprompt_search(params, vocab, task, config.induce, disc_seed);
                d.id = task.relation_id + ":m_disc:s" + std::to_string(s);
                disc.push_back(std::move(d));
            }
            if (config.induce.method != "disc") {
                const uint64_t cont_seed = derive_seed(
                    config.seed, "induce/cont/" + task.relation_id + "/s" + std::to_string(s));
                Template c = optiprompt_optimize(params, vocab, task, config.induce, cont_seed);
                c.id = task.relation_id + ":m_cont:s" + std::to_string(s);
                cont.push_back(std::move(c));
            }
        }
    }
    write_templates(paths.disc_templates(), disc);
    write_templates(paths.cont_templates(), cont);

    if (config.run_control) {
        ModelConfig model_config = config.model;
        model_config.vocab_size = vocab.size();
        const ControlReport report =
            random_init_control(model_config, config.train.weight_init_std, vocab, tasks,
                                config.induce, derive_seed(config.seed, "control"));
        write_control_csv(paths.reports_dir() / "control.csv", report);
    }
}

void stage_filter(const PipelineConfig& config, const RunPaths& paths) {
    const Vocab vocab = Vocab::load(paths.vocab_txt());
    const TaskData tasks = load_tasks(paths);
    const Parameters<float> params = load_checkpoint(paths.checkpoint());
    const auto templates = load_all_templates(paths);

    const AccuracyFn accuracy = [&](const Template& t) {
        return template_accuracy(params, vocab, t, tasks.relation(t.relation_id).test);
    };
    const FilterResult result = filter_templates(templates, accuracy, config.filter_threshold);
    write_templates(paths.retained_templates(), result.retained);
    write_filter_counts_csv(paths.reports_dir() / "filter_counts.csv", result);
}

void stage_diagnose(const PipelineConfig& config, const RunPaths& paths) {
    const Vocab vocab = Vocab::load(paths.vocab_txt());
    const TaskData tasks = load_tasks(paths);
    const Parameters<float> params = load_checkpoint(paths.checkpoint());
    const auto retained = read_templates(paths.retained_templates());
    require(!retained.empty(), ErrorKind::data, "diagnose: no retained templates");

    std::map<std::string, std::vector<EvalRecord>> records_by_template;
    std::map<std::string, PromptType> type_by_template;
    std::map<std::string, ActivationMatrix> matrices;

    for (const auto& tmpl : retained) {
        auto records =
            evaluate_template(params, vocab, tmpl, tasks.relation(tmpl.relation_id).test);
        require(!records.empty(), ErrorKind::data, "no evaluation records for " + tmpl.id);

        ActBitsCache cache;
        cache.template_id = tmpl.id;
        cache.layers = params.config.num_layers;
        cache.units_per_layer = params.config.ff_dim;
        for (const auto& rec : records) {
            std::vector<uint8_t> flags;
            flags.reserve(size_t(cache.layers) * size_t(cache.units_per_layer));
            for (const auto& layer : rec.unit_activations) {
                for (float v : layer) {
                    flags.push_back(v > 0.0f ? 1 : 0);
                }
            }
            cache.per_subject.push_back(std::move(flags));
        }
        cache.aggregated = activation_matrix_from_records(records, config.diagnostics.activation_k);
        write_actbits(paths.traces_dir() / (sanitize_template_id(tmpl.id) + ".actbits"), cache);

        matrices[tmpl.id] = cache.aggregated;
        type_by_template[tmpl.id] = tmpl.type;
        records_by_template[tmpl.id] = std::move(records);
    }

    write_records_csv(paths.reports_dir() / "records.csv", records_by_template);
    write_summary_csv(paths.reports_dir() / "summary.csv",
                      summarize_records(records_by_template, type_by_template));

    const auto pairs = build_pair_stats(params, vocab, retained, records_by_template, matrices);
    write_pairs_csv(paths.reports_dir() / "pairs.csv", pairs);
    write_correlations_csv(paths.reports_dir() / "correlations.csv",
                           correlation_table(pairs, retained, derive_seed(config.seed, "corr")));

    // heatmap matrices on the 0-100 scale
    const struct {
        const char* base;
        PairStatKind kind;
    } kinds[] = {
        {"heatmap_overlap", PairStatKind::activation_overlap},
        {"heatmap_input_similarity", PairStatKind::input_similarity},
        {"heatmap_output_agreement", PairStatKind::output_agreement},
    };
    for (const auto& [base, kind] : kinds) {
        auto cells = type_pair_matrix(pairs, retained, kind,
                                      derive_seed(config.seed, std::string("heatmap/") + base));
        for (auto& cell : cells) {
            cell.mean *= 100.0;
            cell.ci.lo *= 100.0;
            cell.ci.hi *= 100.0;
        }
        write_heatmap_csv(paths.reports_dir() / base, cells);
    }
}

void stage_profile_units(const PipelineConfig& config, const RunPaths& paths) {
    const Vocab vocab = Vocab::load(paths.vocab_txt());
    const TaskData tasks = load_tasks(paths);
    const Parameters<float> params = load_checkpoint(paths.checkpoint());
    const auto retained = read_templates(paths.retained_templates());

    // activation frequencies from the bit-packed caches written by diagnose
    std::vector<EvalRecord> flag_records;
    for (const auto& tmpl : retained) {
        const ActBitsCache cache =
            read_actbits(paths.traces_dir() / (sanitize_template_id(tmpl.id) + ".actbits"));
        for (const auto& flags : cache.per_subject) {
            EvalRecord rec;
            rec.template_id = tmpl.id;
            rec.relation_id = tmpl.relation_id;
            rec.type = tmpl.type;
            rec.unit_activations.assign(size_t(cache.layers),
                                        std::vector<float>(size_t(cache.units_per_layer), 0.0f));
            for (int l = 0; l < cache.layers; ++l) {
                for (int u = 0; u < cache.units_per_layer; ++u) {
                    rec.unit_activations[size_t(l)][size_t(u)] =
                        flags[size_t(l) * size_t(cache.units_per_layer) + size_t(u)] ? 1.0f : 0.0f;
                }
            }
            flag_records.push_back(std::move(rec));
        }
    }
    const UnitFrequencies freqs = activation_frequencies(flag_records);

    const LayerHistogram hist =
        layer_histogram(freqs, config.profile.top_fraction, config.diagnostics.activation_k);
    write_layer_histogram_csv(paths.reports_dir() / "layer_histogram.csv", hist);

    const std::vector<double> saliency =
        unit_saliency(params, vocab, retained, tasks, config.profile.saliency_sample,
                      derive_seed(config.seed, "saliency"));

    const auto typical =
        select_typical_units(freqs, saliency, config.profile.top_fraction,
                             config.profile.bottom_fraction, config.profile.saliency_fraction);

    // units.csv over the full unit grid
    std::vector<UnitsCsvRow> unit_rows;
    const size_t total_units = freqs.overall.size();
    auto type_freq = [&](PromptType t, size_t i) {
        auto it = freqs.per_type.find(t);
        return it == freqs.per_type.end() ? 0.0 : it->second[i];
    };
    std::map<size_t, std::string> typical_of;
    for (const auto& [type, units] : typical) {
        for (const UnitId& u : units) {
            typical_of[freqs.flat(u)] = prompt_type_name(type);
        }
    }
    for (size_t i = 0; i < total_units; ++i) {
        UnitsCsvRow row;
        row.unit = freqs.unflat(i);
        row.freq_human = type_freq(PromptType::human, i);
        row.freq_m_disc = type_freq(PromptType::m_disc, i);
        row.freq_m_cont = type_freq(PromptType::m_cont, i);
        row.saliency = saliency[i];
        auto it = typical_of.find(i);
        if (it != typical_of.end()) {
            row.typical_for = it->second;
        }
        unit_rows.push_back(std::move(row));
    }
    write_units_csv(paths.reports_dir() / "units.csv", unit_rows);

    // corpus scan and per-unit association lists for the typical units
    std::vector<int> corpus_tokens;
    for (const auto& line : load_corpus_ids(paths, vocab)) {
        corpus_tokens.insert(corpus_tokens.end(), line.begin(), line.end());
    }
    const AssociationTable table =
        scan_corpus_associations(params, corpus_tokens, vocab.bos_id(), config.profile.window,
                                 config.profile.stride);

    std::map<PromptType, std::vector<std::vector<RankedItem>>> input_items, output_items;
    for (const auto& [type, units] : typical) {
        for (const UnitId& unit : units) {
            auto in_items = top_items(table, vocab, unit, false, config.profile.items_cap);
            auto out_items = top_items(table, vocab, unit, true, config.profile.items_cap);
            write_association_csv(paths.reports_dir() / "associations" /
                                      ("L" + std::to_string(unit.layer) + "_U" +
                                       std::to_string(unit.unit) + ".csv"),
                                  in_items, out_items);
            input_items[type].push_back(std::move(in_items));
            output_items[type].push_back(std::move(out_items));
        }
    }

    // LMI rankings per prompt type (input and output sides)
    const FrequencyLists in_lists = frequency_lists(typical, input_items);
    const FrequencyLists out_lists = frequency_lists(typical, output_items);
    std::map<PromptType, std::vector<LmiEntry>> in_rank, out_rank;
    bool in_ok = false, out_ok = false;
    for (const auto& [type, counts] : in_lists) {
        in_ok = in_ok || !counts.empty();
    }
    for (const auto& [type, counts] : out_lists) {
        out_ok = out_ok || !counts.empty();
    }
    if (in_ok) {
        in_rank = lmi_rank(in_lists);
    }
    if (out_ok) {
        out_rank = lmi_rank(out_lists);
    }
    for (PromptType type : kAllPromptTypes) {
        std::vector<LmiEntry> in_entries, out_entries;
        if (auto it = in_rank.find(type); it != in_rank.end()) {
            in_entries = it->second;
        }
        if (auto it = out_rank.find(type); it != out_rank.end()) {
            out_entries = it->second;
        }
        write_lmi_csv(paths.reports_dir() /
                          ("lmi_top30_" + std::string(prompt_type_name(type)) + ".csv"),
                      in_entries, out_entries, config.profile.lmi_top);
    }
}

void stage_probe(const PipelineConfig& config, const RunPaths& paths) {
    const Vocab vocab = Vocab::load(paths.vocab_txt());
    const TaskData tasks = load_tasks(paths);
    const Parameters<float> params = load_checkpoint(paths.checkpoint());
    const auto retained = read_templates(paths.retained_templates());

    const ProbeDataset dataset =
        build_dataset(params, vocab, retained, tasks, config.probe.subjects_per_template,
                      derive_seed(config.seed, "probe-data"));

    std::set<std::string> task_set(dataset.task_ids.begin(), dataset.task_ids.end());
    std::vector<std::string> task_ids(task_set.begin(), task_set.end());
    const int partitions = std::min(config.probe.partitions, int(task_ids.size()));
    require(partitions >= 2, ErrorKind::config,
            "probe stage needs at least two retained tasks for disjoint partitions");
    const PartitionPlan plan =
        make_partition_plan(task_ids, partitions, derive_seed(config.seed, "probe-plan"));

    const auto results =
        run_probe_suite(dataset, plan, config.probe, derive_seed(config.seed, "probe-run"));
    write_probes_csv(paths.reports_dir() / "probes.csv", results);
}

void stage_report(const PipelineConfig& config, const RunPaths& paths) {
    (void)config;
    emit_plots(paths);

    // short digest pointing at the main artifacts
    std::string out;
    out += "run artifacts\n";
    out += "=============\n";
    out += "summary.csv           accuracy / perplexity / attention / entropy per prompt type\n";
    out += "pairs.csv             per-pair input similarity, output agreement, overlap\n";
    out += "correlations.csv      pairwise-statistic correlations with bootstrap CIs\n";
    out += "heatmap_*             type-pair matrices (0-100 scale) with CI bounds\n";
    out += "layer_histogram.csv   highly activated units per layer and prompt type\n";
    out += "units.csv             per-unit frequencies, saliency, typicality\n";
    out += "associations/         per-typical-unit vocabulary associations\n";
    out += "lmi_top30_*.csv       most type-distinctive vocabulary items\n";
    out += "probes.csv            per-layer prompt-type probe accuracy\n";
    out += "control.csv           untrained-model induction control\n";
    out += "\nplots: overlap_heatmap.svg, input_similarity_heatmap.svg, "
           "output_agreement_heatmap.svg, layer_histogram.svg, probe_accuracy.svg\n";
    write_text_file(paths.reports_dir() / "index.txt", out);
}

} // namespace

void emit_plots(const RunPaths& paths) {
    // heatmaps from the three statistic matrices
    const struct {
        const char* base;
        const char* title;
        const char* out;
    } heatmaps[] = {
        {"heatmap_overlap", "activation overlap (0-100)", "overlap_heatmap.svg"},
        {"heatmap_input_similarity", "input similarity (0-100)", "input_similarity_heatmap.svg"},
        {"heatmap_output_agreement", "output agreement (0-100)", "output_agreement_heatmap.svg"},
    };
    for (const auto& h : heatmaps) {
        const std::string base = (paths.reports_dir() / h.base).string();
        const LabeledMatrix mean = read_labeled_matrix(base + "_mean.csv");
        const LabeledMatrix lo = read_labeled_matrix(base + "_ci_lo.csv");
        const LabeledMatrix hi = read_labeled_matrix(base + "_ci_hi.csv");
        write_text_file(paths.plots_dir() / h.out,
                        svg_heatmap(h.title, mean.labels, mean.values, lo.values, hi.values,
                                    100.0));
    }

    // layer histogram
    {
        const CsvTable table = read_csv(paths.reports_dir() / "layer_histogram.csv");
        const int layer_col = table.column("layer");
        const int type_col = table.column("type");
        const int count_col = table.column("count");
        std::map<std::string, std::map<int, int>> by_type;
        int max_layer = 0;
        for (const auto& row : table.rows) {
            const int layer = std::stoi(row[size_t(layer_col)]);
            by_type[row[size_t(type_col)]][layer] = std::stoi(row[size_t(count_col)]);
            max_layer = std::max(max_layer, layer);
        }
        std::vector<std::string> names;
        std::vector<std::vector<int>> counts;
        for (PromptType t : kAllPromptTypes) {
            auto it = by_type.find(prompt_type_name(t));
            if (it == by_type.end()) {
                continue;
            }
            names.push_back(prompt_type_name(t));
            std::vector<int> series(size_t(max_layer) + 1, 0);
            for (const auto& [layer, count] : it->second) {
                series[size_t(layer)] = count;
            }
            counts.push_back(std::move(series));
        }
        write_text_file(paths.plots_dir() / "layer_histogram.svg",
                        svg_layer_histogram("highly activated units per layer", names, counts));
    }

    // per-layer probe accuracies
    {
        const CsvTable table = read_csv(paths.reports_dir() / "probes.csv");
        const int layer_col = table.column("layer");
        const int pair_col = table.column("pair");
        const int mean_col = table.column("mean_accuracy");
        const int std_col = table.column("std_accuracy");
        std::map<std::string, std::map<int, std::pair<double, double>>> by_pair;
        int max_layer = 0;
        for (const auto& row : table.rows) {
            const int layer = std::stoi(row[size_t(layer_col)]);
            by_pair[row[size_t(pair_col)]][layer] = {std::stod(row[size_t(mean_col)]),
                                                     std::stod(row[size_t(std_col)])};
            max_layer = std::max(max_layer, layer);
        }
        std::vector<LineSeries> series;
        for (const auto& [pair, per_layer] : by_pair) {
            LineSeries ls;
            ls.name = pair;
            ls.mean.assign(size_t(max_layer) + 1, 0.0);
            ls.std_dev.assign(size_t(max_layer) + 1, 0.0);
            for (const auto& [layer, ms] : per_layer) {
                ls.mean[size_t(layer)] = ms.first;
                ls.std_dev[size_t(layer)] = ms.second;
            }
            series.push_back(std::move(ls));
        }
        write_text_file(paths.plots_dir() / "probe_accuracy.svg",
                        svg_probe_lines("prompt-type probes per layer", series));
    }
}

// ---------------------------------------------------------------------------
// stage runner
// ---------------------------------------------------------------------------

namespace {

struct StageDef {
    std::string name;
    std::function<void(const PipelineConfig&, const RunPaths&)> run;
    std::function<std::vector<std::filesystem::path>(const RunPaths&)> outputs;
};

std::vector<StageDef> build_stages() {
    std::vector<StageDef> stages;
    stages.push_back({"gen-corpus", stage_gen_corpus,
                      [](const RunPaths& p) {
                          return std::vector<std::filesystem::path>{
                              p.corpus_txt(), p.vocab_txt(),  p.facts_tsv(),
                              p.train_tsv(),  p.test_tsv(),   p.human_templates()};
                      }});
    stages.push_back({"train-ref", stage_train_ref,
                      [](const RunPaths& p) {
                          return std::vector<std::filesystem::path>{
                              p.checkpoint(), p.train_log(), p.checkpoint_hash()};
                      }});
    stages.push_back({"induce", stage_induce,
                      [](const RunPaths& p) {
                          return std::vector<std::filesystem::path>{p.disc_templates(),
                                                                    p.cont_templates()};
                      }});
    stages.push_back({"filter", stage_filter,
                      [](const RunPaths& p) {
                          return std::vector<std::filesystem::path>{
                              p.retained_templates(), p.reports_dir() / "filter_counts.csv"};
                      }});
    stages.push_back({"diagnose", stage_diagnose,
                      [](const RunPaths& p) {
                          return std::vector<std::filesystem::path>{
                              p.reports_dir() / "records.csv", p.reports_dir() / "summary.csv",
                              p.reports_dir() / "pairs.csv",
                              p.reports_dir() / "correlations.csv",
                              p.reports_dir() / "heatmap_overlap_mean.csv"};
                      }});
    stages.push_back({"profile-units", stage_profile_units,
                      [](const RunPaths& p) {
                          return std::vector<std::filesystem::path>{
                              p.reports_dir() / "layer_histogram.csv",
                              p.reports_dir() / "units.csv",
                              p.reports_dir() / "lmi_top30_human.csv"};
                      }});
    stages.push_back({"probe", stage_probe,
                      [](const RunPaths& p) {
                          return std::vector<std::filesystem::path>{p.reports_dir() / "probes.csv"};
                      }});
    stages.push_back({"report", stage_report,
                      [](const RunPaths& p) {
                          return std::vector<std::filesystem::path>{
                              p.reports_dir() / "index.txt",
                              p.plots_dir() / "overlap_heatmap.svg",
                              p.plots_dir() / "layer_histogram.svg",
                              p.plots_dir() / "probe_accuracy.svg"};
                      }});
    return stages;
}

void write_status(const RunPaths& paths, bool ok, const std::string& stage,
                  const std::string& error, const StageRunReport& report) {
    nlohmann::json j;
    j["ok"] = ok;
    j["stage"] = stage;
    if (!error.empty()) {
        j["error"] = error;
    }
    j["executed"] = report.executed;
    j["skipped"] = report.skipped;
    write_text_file(paths.status(), j.dump(2) + "\n");
}

} // namespace

StageRunReport run_pipeline(const PipelineConfig& config, const std::string& final_stage) {
    const RunPaths paths{config.out_dir};
    std::filesystem::create_directories(paths.root);

    // manifest: written before any stage output, immutable afterwards
    const std::string manifest = config.manifest_text();
    if (std::filesystem::exists(paths.manifest())) {
        require(read_text_file(paths.manifest()) == manifest, ErrorKind::config,
                "run directory belongs to a different manifest: " + paths.manifest().string());
    } else {
        write_text_file(paths.manifest(), manifest);
    }

    const auto stages = build_stages();
    bool found = false;
    for (const auto& s : stages) {
        found = found || s.name == final_stage;
    }
    require(found, ErrorKind::config, "unknown pipeline stage: " + final_stage);

    StageRunReport report;
    std::string chain = hash_hex(config.manifest_hash());
    bool upstream_ran = false;

    for (const auto& stage : stages) {
        chain = hash_hex(fnv1a(chain + "/" + stage.name));
        const auto stamp_path = paths.stamp(stage.name);

        bool fresh = !upstream_ran && std::filesystem::exists(stamp_path) &&
                     read_text_file(stamp_path) == chain;
        if (fresh) {
            for (const auto& output : stage.outputs(paths)) {
                fresh = fresh && std::filesystem::exists(output);
            }
        }

        if (fresh) {
            report.skipped.push_back(stage.name);
        } else {
            const auto t0 = std::chrono::steady_clock::now();
            try {
                stage.run(config, paths);
            } catch (const std::exception& e) {
                write_status(paths, false, stage.name, e.what(), report);
                throw;
            }
            write_text_file(stamp_path, chain);
            report.executed.push_back(stage.name);
            upstream_ran = true;
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::printf("[plab] stage %-14s %.1fs\n", stage.name.c_str(), secs);
            std::fflush(stdout);
        }

        if (stage.name == final_stage) {
            break;
        }
    }

    write_status(paths, true, final_stage, "", report);
    return report;
}

} // namespace plab
