// Command-line front end for the backdoor-evaluation pipeline:
//   generate -> poison -> train -> eval -> sweep -> defend
// plus an ingest adapter for GTSRB-style datasets. Flags override config
// fields; `--set key=value` reaches any field by its config key.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "glowsign/config.hpp"
#include "glowsign/error.hpp"
#include "glowsign/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_file;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_file, "Config file (key = value lines)");
    cmd->add_option("--set", args.overrides,
                    "Override a config field, e.g. --set poison.alpha=0.8");
}

glowsign::PipelineConfig resolve_config(const CommonArgs& args) {
    glowsign::PipelineConfig config;
    if (!args.config_file.empty()) config = glowsign::load_config_file(args.config_file);
    for (const auto& item : args.overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw glowsign::InvalidInputError("--set expects key=value, got '" + item + "'");
        glowsign::apply_config_override(config, item.substr(0, eq), item.substr(eq + 1));
    }
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fluorescent-trigger backdoor evaluation toolkit"};
    app.require_subcommand(1);

    CommonArgs gen_args, poison_args, train_args, eval_args, sweep_args, defend_args,
        ingest_args;

    auto* gen = app.add_subcommand("generate", "Write a synthetic sign dataset");
    add_common(gen, gen_args);
    std::string gen_out;
    gen->add_option("-o,--out", gen_out, "Dataset output directory")->required();

    auto* poison = app.add_subcommand("poison", "Materialize the poisoned dataset");
    add_common(poison, poison_args);

    auto* train_cmd = app.add_subcommand("train", "Train the reference classifier");
    add_common(train_cmd, train_args);
    bool baseline = false;
    train_cmd->add_flag("--baseline", baseline,
                        "Train the clean-only baseline (lambda = 1) instead");

    auto* eval_cmd = app.add_subcommand("eval", "Clean accuracy, ASR, optional mAP");
    add_common(eval_cmd, eval_args);

    auto* sweep = app.add_subcommand("sweep", "Environment-factor ASR sweep");
    add_common(sweep, sweep_args);

    auto* defend = app.add_subcommand("defend", "JPEG and STRIP defenses");
    add_common(defend, defend_args);

    auto* ingest = app.add_subcommand("ingest", "Convert a GTSRB-style dataset");
    add_common(ingest, ingest_args);
    std::string ingest_src, ingest_out, ingest_shapes;
    ingest->add_option("--src", ingest_src, "Source dataset root")->required();
    ingest->add_option("-o,--out", ingest_out, "Converted dataset directory")->required();
    ingest->add_option("--shape-map", ingest_shapes,
                       "class-id=shape mapping file (unmapped ids become circles)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const auto ds = glowsign::pipeline::cmd_generate(resolve_config(gen_args), gen_out);
            std::cout << "generated " << ds.images.size() << " images under " << gen_out
                      << "\n";
        } else if (poison->parsed()) {
            const auto summary = glowsign::pipeline::cmd_poison(resolve_config(poison_args));
            std::cout << "poisoned " << summary.poisoned_signs << " signs across "
                      << summary.selected_images << "/" << summary.total_images
                      << " images (skipped " << summary.skipped_signs << ")\n";
        } else if (train_cmd->parsed()) {
            glowsign::pipeline::cmd_train(resolve_config(train_args), baseline);
            std::cout << (baseline ? "baseline" : "model") << " checkpoint written\n";
        } else if (eval_cmd->parsed()) {
            const auto report = glowsign::pipeline::cmd_eval(resolve_config(eval_args));
            std::cout << glowsign::report_to_text(report);
        } else if (sweep->parsed()) {
            const auto report = glowsign::pipeline::cmd_sweep(resolve_config(sweep_args));
            std::cout << glowsign::report_to_text(report);
        } else if (defend->parsed()) {
            const auto report = glowsign::pipeline::cmd_defend(resolve_config(defend_args));
            std::cout << glowsign::report_to_text(report);
        } else if (ingest->parsed()) {
            const auto ds = glowsign::pipeline::cmd_ingest(resolve_config(ingest_args),
                                                           ingest_src, ingest_out,
                                                           ingest_shapes);
            std::cout << "ingested " << ds.images.size() << " images into " << ingest_out
                      << "\n";
        }
    } catch (const glowsign::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return glowsign::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
