// Command-line front end: synth / run / replicate subcommands over a flat
// key-value config file, with targeted flag overrides.
#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "pdprog/pipeline.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string seed;
    std::string method;
    std::string k_range;
    std::string out;
    std::string input;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "config file (key = value lines)");
    cmd->add_option("--seed", flags.seed, "override the pipeline seed");
    cmd->add_option("--method", flags.method, "override dimred.method (nmf|pca|ica)");
    cmd->add_option("--k-range", flags.k_range, "override the GMM k range, e.g. 1..6");
    cmd->add_option("--out", flags.out, "override the output directory");
}

pdprog::PipelineConfig build_config(const CommonFlags& flags) {
    pdprog::PipelineConfig cfg;
    if (!flags.config_path.empty()) cfg = pdprog::load_config(flags.config_path);
    if (!flags.seed.empty()) pdprog::apply_override(cfg, "seed", flags.seed);
    if (!flags.method.empty()) pdprog::apply_override(cfg, "dimred.method", flags.method);
    if (!flags.k_range.empty()) {
        std::string range = flags.k_range;
        for (auto& c : range)
            if (c == '-' || c == ':') c = ',';
        size_t dots = range.find("..");
        if (dots != std::string::npos) range = range.substr(0, dots) + "," + range.substr(dots + 2);
        auto parts = pdprog::split(range, ',');
        if (parts.size() != 2)
            throw pdprog::ValidationError("--k-range expects two values, e.g. 1..6");
        pdprog::apply_override(cfg, "gmm.k_min", pdprog::trim(parts[0]));
        pdprog::apply_override(cfg, "gmm.k_max", pdprog::trim(parts[1]));
    }
    if (!flags.out.empty()) pdprog::apply_override(cfg, "out_dir", flags.out);
    if (!flags.input.empty()) pdprog::apply_override(cfg, "input", flags.input);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"longitudinal progression-subtype pipeline"};
    app.require_subcommand(1);

    CommonFlags synth_flags, run_flags, rep_flags;
    std::string model_dir, external_csv;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic cohort with planted subtypes");
    add_common(synth, synth_flags);

    CLI::App* run = app.add_subcommand("run", "run the full pipeline on a visits CSV");
    add_common(run, run_flags);
    run->add_option("--input", run_flags.input, "override the input visits CSV path");

    CLI::App* replicate =
        app.add_subcommand("replicate", "score stored artifacts against an external cohort");
    add_common(replicate, rep_flags);
    replicate->add_option("--model-dir", model_dir, "directory holding a previous run's artifacts")
        ->required();
    replicate->add_option("--external", external_csv, "external visits CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            pdprog::cmd_synth(build_config(synth_flags));
        } else if (run->parsed()) {
            pdprog::cmd_run(build_config(run_flags));
        } else if (replicate->parsed()) {
            pdprog::cmd_replicate(build_config(rep_flags), model_dir, external_csv);
        }
    } catch (const pdprog::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
