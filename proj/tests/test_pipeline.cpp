#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "glowsign/error.hpp"
#include "glowsign/pipeline.hpp"

using namespace glowsign;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "glowsign_pipeline_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<char> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small config that runs the whole chain in seconds.
PipelineConfig mini_config(const fs::path& root) {
    PipelineConfig config;
    config.out_dir = (root / "out").string();
    config.dataset_dir = (root / "train").string();
    config.eval_dataset_dir = (root / "eval").string();
    config.gen.classes = 3;
    config.gen.per_class = 12;
    config.gen.image_size = 64;
    config.gen.seed = 101;
    config.poison_ratio = 0.25;
    config.powers = {80, 120};
    config.ambients = {300, 1000};
    config.uv_distances = {2};
    config.interp_steps = 1;
    config.trigger_render_size = 32;
    config.train.epochs = 4;
    config.train.crop_size = 16;
    config.train.batch_size = 16;
    config.train.learning_rate = 0.04;
    config.sweep_values = {"0.5", "1.0"};
    config.sweep_factor = "trigger_size";
    config.strip.num_overlays = 8;
    return config;
}

void generate_both(PipelineConfig config) {
    pipeline::cmd_generate(config, config.dataset_dir);
    PipelineConfig eval_gen = config;
    eval_gen.gen.seed = config.gen.seed + 1;
    eval_gen.gen.per_class = 40;  // STRIP needs a calibration split >= 50
    pipeline::cmd_generate(eval_gen, config.eval_dataset_dir);
}

}  // namespace

TEST_CASE("full pipeline chain runs and reports") {
    const fs::path root = fresh_dir("chain");
    PipelineConfig config = mini_config(root);
    generate_both(config);

    const PoisonSummary summary = pipeline::cmd_poison(config);
    CHECK(summary.selected_images == 9);  // ceil(0.25 * 36)
    CHECK(summary.poisoned_signs == 9);
    CHECK(fs::exists(config.poisoned_dir() / kManifestFileName));
    CHECK(fs::exists(config.poisoned_dir() / "vqa.jsonl"));
    CHECK(fs::exists(config.poisoned_dir() / "triggers/trigger_000.png"));

    pipeline::cmd_train(config);
    CHECK(fs::exists(config.model_path()));
    pipeline::cmd_train(config, /*baseline=*/true);
    CHECK(fs::exists(config.baseline_path()));

    const EvaluationReport report = pipeline::cmd_eval(config);
    CHECK(report.clean_accuracy >= 0.0);
    CHECK(report.asr.count("misrecognition") == 1);
    CHECK(fs::exists(config.report_json_path()));
    CHECK(fs::exists(config.report_text_path()));

    const EvaluationReport swept = pipeline::cmd_sweep(config);
    REQUIRE(swept.sweeps.size() == 1);
    CHECK(swept.sweeps[0].factor == "trigger_size");
    CHECK(swept.sweeps[0].points.size() == 2);
    // Eval results survive the sweep merge.
    CHECK(swept.clean_accuracy == doctest::Approx(report.clean_accuracy));

    const EvaluationReport defended = pipeline::cmd_defend(config);
    CHECK(defended.defense.contains("jpeg"));
    CHECK(defended.defense.contains("strip"));
    CHECK(fs::exists(config.defense_dir() / "jpeg_model.ckpt"));

    // Run logs carry the config hash.
    const auto log = file_bytes(config.logs_dir() / "train.runlog");
    const std::string log_text(log.begin(), log.end());
    CHECK(log_text.find(config_hash(config)) != std::string::npos);
}

TEST_CASE("stage dependencies are reported by name") {
    const fs::path root = fresh_dir("deps");
    PipelineConfig config = mini_config(root);
    CHECK_THROWS_AS(pipeline::cmd_poison(config), StageDependencyError);
    generate_both(config);
    // eval without a checkpoint names the missing artifact
    try {
        pipeline::cmd_eval(config);
        FAIL("expected StageDependencyError");
    } catch (const StageDependencyError& e) {
        CHECK(std::string(e.what()).find("model.ckpt") != std::string::npos);
    }
    // train without a poison manifest
    CHECK_THROWS_AS(pipeline::cmd_train(config), StageDependencyError);
}

TEST_CASE("identical configs reproduce artifacts byte-for-byte") {
    const fs::path root_a = fresh_dir("repro_a");
    const fs::path root_b = fresh_dir("repro_b");

    for (const fs::path& root : {root_a, root_b}) {
        PipelineConfig config = mini_config(root);
        config.train.epochs = 2;
        generate_both(config);
        pipeline::cmd_poison(config);
        pipeline::cmd_train(config);
        pipeline::cmd_eval(config);
    }

    const PipelineConfig a = mini_config(root_a);
    const PipelineConfig b = mini_config(root_b);
    CHECK(file_bytes(a.poisoned_dir() / kManifestFileName) ==
          file_bytes(b.poisoned_dir() / kManifestFileName));
    CHECK(file_bytes(a.poisoned_dir() / "vqa.jsonl") ==
          file_bytes(b.poisoned_dir() / "vqa.jsonl"));
    CHECK(file_bytes(a.model_path()) == file_bytes(b.model_path()));
    CHECK(file_bytes(a.report_json_path()) == file_bytes(b.report_json_path()));
}

TEST_CASE("goal resolution falls back to the first class") {
    Dataset ds;
    SignBox box;
    box.u = box.v = 0;
    box.w = box.h = 10;
    box.label = "zebra";
    ds.images.push_back({"a.png", {box}});
    box.label = "apple";
    ds.images.push_back({"b.png", {box}});

    PipelineConfig config;
    const AttackGoal goal = pipeline::goal_from_config(config, ds);
    CHECK(goal.target_label == "apple");  // sorted label order

    config.goal = "hiding";
    const AttackGoal hiding = pipeline::goal_from_config(config, ds);
    CHECK(hiding.tag == GoalTag::hiding);
    CHECK(hiding.target_label.empty());
}
