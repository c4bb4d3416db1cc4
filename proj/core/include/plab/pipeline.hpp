#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "plab/config_file.hpp"
#include "plab/diagnostics.hpp"
#include "plab/induce.hpp"
#include "plab/probes.hpp"
#include "plab/train.hpp"
#include "plab/world.hpp"

namespace plab {

// Pipeline orchestration: configuration, run-directory persistence, stage
// caching and resumption. Stages communicate exclusively through files under
// the run directory, so any stage can be re-run from cached artifacts.

struct StopConfig {
    double target_accuracy = 0.30; // best held-out human template per relation
    int target_relations = 6;      // stop once this many relations clear it
};

struct ProfileConfig {
    double top_fraction = 0.20;
    double bottom_fraction = 0.20;
    double saliency_fraction = 0.25;
    int window = 15;
    int stride = 15;
    int saliency_sample = 200;
    int items_cap = 500;
    int lmi_top = 30;
};

struct PipelineConfig {
    uint64_t seed = 42;
    std::filesystem::path out_dir = "runs/exp";
    WorldSpec world;
    ModelConfig model; // vocab_size is filled from the generated vocabulary
    TrainConfig train;
    StopConfig stop;
    InduceConfig induce;
    bool run_control = true;
    double filter_threshold = 0.10;
    DiagnosticsConfig diagnostics;
    ProfileConfig profile;
    ProbeConfig probe;

    static PipelineConfig defaults();
    static PipelineConfig from_config(const ConfigFile& file);
    ConfigFile to_config() const;

    // manifest text: config snapshot, seeds, module versions and the
    // under-specified design decisions in force (out_dir excluded, so a run
    // directory can be relocated)
    std::string manifest_text() const;
    uint64_t manifest_hash() const;
};

// artifact layout inside one run directory
struct RunPaths {
    std::filesystem::path root;

    std::filesystem::path manifest() const { return root / "manifest" / "manifest.txt"; }
    std::filesystem::path stamp(const std::string& stage) const {
        return root / "manifest" / "stamps" / (stage + ".stamp");
    }
    std::filesystem::path checkpoint_hash() const { return root / "manifest" / "checkpoint.hash"; }
    std::filesystem::path status() const { return root / "status.json"; }

    std::filesystem::path corpus_txt() const { return root / "corpus" / "corpus.txt"; }
    std::filesystem::path vocab_txt() const { return root / "corpus" / "vocab.txt"; }
    std::filesystem::path facts_tsv() const { return root / "corpus" / "facts.tsv"; }
    std::filesystem::path train_tsv() const { return root / "tasks" / "train.tsv"; }
    std::filesystem::path test_tsv() const { return root / "tasks" / "test.tsv"; }

    std::filesystem::path human_templates() const { return root / "templates" / "human.tsv"; }
    std::filesystem::path disc_templates() const { return root / "templates" / "m_disc.tsv"; }
    std::filesystem::path cont_templates() const { return root / "templates" / "m_cont.tsv"; }
    std::filesystem::path retained_templates() const { return root / "templates" / "retained.tsv"; }

    std::filesystem::path checkpoint() const { return root / "checkpoints" / "model.ckpt"; }
    std::filesystem::path train_log() const { return root / "checkpoints" / "train_log.csv"; }

    std::filesystem::path traces_dir() const { return root / "traces"; }
    std::filesystem::path reports_dir() const { return root / "reports"; }
    std::filesystem::path plots_dir() const { return root / "plots"; }
};

inline const std::vector<std::string>& pipeline_stage_names() {
    static const std::vector<std::string> names = {"gen-corpus",    "train-ref", "induce",
                                                   "filter",        "diagnose",  "profile-units",
                                                   "probe",         "report"};
    return names;
}

struct StageRunReport {
    std::vector<std::string> executed;
    std::vector<std::string> skipped;
};

// Runs stages in order up to final_stage (default: the whole pipeline). A
// stage re-runs when its stamp is missing/stale, any declared output is
// missing, or an upstream stage re-ran in this invocation; otherwise the
// cached artifacts are kept. Writes status.json on both success and failure.
StageRunReport run_pipeline(const PipelineConfig& config, const std::string& final_stage = "report");

// plot emission from the report CSVs (also reachable through the "report"
// stage); fails with a missing-input error when a data file is absent
void emit_plots(const RunPaths& paths);

// ---------------------------------------------------------------------------
// Bit-packed boolean activation cache, traces/<template>.actbits
// ---------------------------------------------------------------------------

struct ActBitsCache {
    std::string template_id;
    int layers = 0;
    int units_per_layer = 0;
    std::vector<std::vector<uint8_t>> per_subject; // unpacked 0/1 flags, layer-major
    ActivationMatrix aggregated;
};

void write_actbits(const std::filesystem::path& path, const ActBitsCache& cache);
ActBitsCache read_actbits(const std::filesystem::path& path);

std::string sanitize_template_id(const std::string& id);

} // namespace plab
