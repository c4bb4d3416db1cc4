// promptlab: prompt-processing laboratory pipeline driver.
//
// Stages: gen-corpus -> train-ref -> induce -> filter -> diagnose ->
// profile-units -> probe -> report. Each subcommand runs the pipeline up to
// that stage, reusing cached artifacts; run-all drives the whole chain.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "plab/checkpoint.hpp"
#include "plab/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::string seed;
    std::vector<std::string> overrides;
    std::string induce_method;
    std::string induce_task;
    std::string induce_seeds;
    std::string filter_threshold;
};

plab::PipelineConfig resolve_config(const CommonOpts& opts) {
    plab::ConfigFile file;
    if (!opts.config_path.empty()) {
        file = plab::ConfigFile::load(opts.config_path);
    }
    // flags override config keys
    if (!opts.seed.empty()) {
        file.set("run", "seed", opts.seed);
    }
    if (!opts.out_dir.empty()) {
        file.set("run", "out_dir", opts.out_dir);
    }
    if (!opts.induce_method.empty()) {
        file.set("induce", "method", opts.induce_method);
    }
    if (!opts.induce_task.empty()) {
        file.set("induce", "only_task", opts.induce_task);
    }
    if (!opts.induce_seeds.empty()) {
        file.set("induce", "num_seeds", opts.induce_seeds);
    }
    if (!opts.filter_threshold.empty()) {
        file.set("filter", "threshold", opts.filter_threshold);
    }
    for (const auto& assignment : opts.overrides) {
        file.set_dotted(assignment);
    }
    return plab::PipelineConfig::from_config(file);
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "config file (nested key-value sections)");
    cmd->add_option("--out", opts.out_dir, "run directory");
    cmd->add_option("--seed", opts.seed, "root seed");
    cmd->add_option("--set", opts.overrides, "override a config key, section.key=value")
        ->take_all();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"promptlab: trains a small instrumented LM, induces machine prompts and runs "
                 "the diagnostic battery"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string run_stage;

    for (const auto& stage : plab::pipeline_stage_names()) {
        CLI::App* cmd = app.add_subcommand(stage, "run the pipeline up to this stage");
        add_common(cmd, opts);
        if (stage == "induce") {
            cmd->add_option("--method", opts.induce_method, "disc, cont or both")
                ->check(CLI::IsMember({"disc", "cont", "both"}));
            cmd->add_option("--task", opts.induce_task, "restrict induction to one relation id");
            cmd->add_option("--seeds", opts.induce_seeds, "templates per task and method");
        }
        if (stage == "filter") {
            cmd->add_option("--threshold", opts.filter_threshold,
                            "retention threshold (strictly exceeded)");
        }
        cmd->callback([&run_stage, stage] { run_stage = stage; });
    }
    {
        CLI::App* cmd = app.add_subcommand("run-all", "run the full pipeline");
        add_common(cmd, opts);
        cmd->callback([&run_stage] { run_stage = "report"; });
    }

    std::string checkpoint_path;
    CLI::App* inspect = app.add_subcommand("inspect", "describe a model checkpoint");
    inspect->add_option("checkpoint", checkpoint_path, "checkpoint file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (inspect->parsed()) {
            const auto params = plab::load_checkpoint(checkpoint_path);
            std::fputs(plab::describe_checkpoint(params).c_str(), stdout);
            return 0;
        }
        const plab::PipelineConfig config = resolve_config(opts);
        const plab::StageRunReport report = plab::run_pipeline(config, run_stage);
        std::printf("[plab] done: %zu stage(s) executed, %zu cached\n", report.executed.size(),
                    report.skipped.size());
        return 0;
    } catch (const plab::Error& e) {
        std::fprintf(stderr, "error (%s): %s\n", plab::error_kind_name(e.kind()), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
