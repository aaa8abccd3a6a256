#include "glowsign/pipeline.hpp"

#include <fstream>
#include <iostream>
#include <set>

#include "glowsign/defense.hpp"
#include "glowsign/error.hpp"
#include "glowsign/rng.hpp"
#include "glowsign/vqa.hpp"

namespace glowsign {
namespace pipeline {

namespace fs = std::filesystem;

namespace {

void write_run_log(const PipelineConfig& config, const std::string& stage,
                   const std::vector<std::string>& lines) {
    std::error_code ec;
    fs::create_directories(config.logs_dir(), ec);
    const fs::path file = config.logs_dir() / (stage + ".runlog");
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write run log '" + file.string() + "'");
    out << "stage = " << stage << "\n";
    out << "version = " << kToolVersion << "\n";
    out << "config_hash = " << config_hash(config) << "\n";
    for (const auto& line : lines) out << line << "\n";
}

Dataset require_dataset(const std::string& dir, const std::string& role) {
    if (dir.empty())
        throw StageDependencyError("no " + role + " dataset configured");
    if (!fs::exists(fs::path(dir) / kAnnotationFileName))
        throw StageDependencyError("missing " + role + " dataset annotations at '" + dir +
                                   "/" + std::string(kAnnotationFileName) + "'");
    return load_dataset(dir);
}

ConvNet require_model(const PipelineConfig& config) {
    if (!fs::exists(config.model_path()))
        throw StageDependencyError("missing model checkpoint '" +
                                   config.model_path().string() + "' (run train first)");
    return load_checkpoint(config.model_path());
}

EvaluationReport load_or_empty_report(const PipelineConfig& config) {
    if (!fs::exists(config.report_json_path())) return {};
    std::ifstream in(config.report_json_path());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return report_from_json(Json::parse(buffer.str()));
}

void write_report(const PipelineConfig& config, const EvaluationReport& report) {
    std::ofstream json_out(config.report_json_path(), std::ios::binary);
    if (!json_out) throw IoError("cannot write report");
    json_out << report_to_json(report).dump(2) << "\n";
    std::ofstream text_out(config.report_text_path(), std::ios::binary);
    text_out << report_to_text(report);
}

// Backdoor training crops straight from the poison manifest.
std::vector<Crop> backdoor_crops(const PipelineConfig& config) {
    const std::vector<PoisonRecord> records = load_manifest(config.poisoned_dir());
    std::vector<Crop> crops;
    crops.reserve(records.size());
    std::string cached_path;
    Image cached;
    for (const auto& rec : records) {
        if (rec.image_path != cached_path) {
            cached = load_image(config.poisoned_dir() / rec.image_path);
            cached_path = rec.image_path;
        }
        crops.push_back(extract_crop(cached, rec.box, rec.source_id, config.train.crop_size));
    }
    return crops;
}

}  // namespace

AttackGoal goal_from_config(const PipelineConfig& config, const Dataset& clean_dataset) {
    const GoalTag tag = parse_goal_tag(config.goal);
    AttackGoal goal;
    goal.tag = tag;
    goal.target_action = config.target_action;
    if (tag == GoalTag::hiding) {
        goal.target_label.clear();
        goal.target_action = config.target_action == "stop immediately"
                                 ? "maintain the state"
                                 : config.target_action;
    } else if (!config.target_label.empty()) {
        goal.target_label = config.target_label;
    } else {
        const auto labels = collect_class_labels(clean_dataset);
        if (labels.empty()) throw InvalidInputError("dataset has no class labels");
        goal.target_label = labels.front();
    }
    goal.validate();
    return goal;
}

std::vector<TriggerAsset> trigger_set_from_config(const PipelineConfig& config) {
    return build_trigger_set(config.trigger_conditions(), config.interp_steps,
                             config.trigger_render_size, config.fluor);
}

std::vector<Crop> poisoned_eval_crops(const PipelineConfig& config, const ConvNet& net,
                                      const std::vector<Crop>& clean_eval_crops,
                                      const AttackGoal& goal) {
    (void)net;
    const std::vector<TriggerAsset> triggers = trigger_set_from_config(config);
    Rng rng(Rng::mix(config.poison_seed, 0xE7A1));
    std::vector<Crop> out;
    out.reserve(clean_eval_crops.size());
    for (const auto& crop : clean_eval_crops) {
        const TriggerAsset& trigger = triggers[rng.below(triggers.size())];
        out.push_back(poison_crop(crop, trigger, goal, config.alpha, config.size_scale,
                                  parse_position_mode(config.position),
                                  config.env.camera_distance, config.env.camera_distance));
    }
    return out;
}

Dataset cmd_generate(const PipelineConfig& config, const fs::path& out_dir) {
    config.validate();
    Dataset ds = generate_synthetic_dataset(config.gen, out_dir);
    write_run_log(config, "generate",
                  {"seed = " + std::to_string(config.gen.seed),
                   "images = " + std::to_string(ds.images.size()),
                   "out = " + out_dir.string()});
    return ds;
}

PoisonSummary cmd_poison(const PipelineConfig& config) {
    config.validate();
    const Dataset dataset = require_dataset(config.dataset_dir, "training");
    const AttackGoal goal = goal_from_config(config, dataset);

    PoisonSpec spec;
    spec.goal = goal;
    spec.alpha = config.alpha;
    spec.poison_ratio = config.poison_ratio;
    spec.seed = config.poison_seed;
    spec.trigger_set = trigger_set_from_config(config);
    spec.size_scale = config.size_scale;
    spec.position_mode = parse_position_mode(config.position);

    PoisonSummary summary = poison_dataset(dataset, config.poisoned_dir(), spec);

    if (config.emit_vqa) {
        std::set<std::string> poisoned_ids;
        for (const auto& rec : summary.records) poisoned_ids.insert(rec.source_id);
        std::vector<VQARecord> records = generate_vqa_records(dataset);
        size_t skipped = 0;
        for (auto& rec : records) {
            if (!poisoned_ids.count(rec.image_id)) continue;
            rec.poisoned = true;
            if (auto rewritten = rewrite_vqa_response(rec, goal)) {
                rec = *rewritten;
            } else {
                rec.poisoned = false;  // excluded from the poison set
                ++skipped;
            }
        }
        save_vqa_records(records, config.poisoned_dir() / "vqa.jsonl");
        if (skipped)
            std::cerr << "warning: " << skipped
                      << " VQA records were unparseable and stayed clean\n";
    }

    write_run_log(config, "poison",
                  {"seed = " + std::to_string(config.poison_seed),
                   "goal = " + to_string(goal.tag),
                   "target_label = " + goal.target_label,
                   "selected_images = " + std::to_string(summary.selected_images),
                   "poisoned_signs = " + std::to_string(summary.poisoned_signs),
                   "skipped_signs = " + std::to_string(summary.skipped_signs)});
    return summary;
}

void cmd_train(const PipelineConfig& config, bool baseline) {
    config.validate();
    const Dataset clean_ds = require_dataset(config.dataset_dir, "training");
    const std::vector<Crop> clean = crops_from_dataset(clean_ds, config.train.crop_size);

    std::vector<Crop> backdoor;
    TrainingConfig train_config = config.train;
    if (baseline) {
        train_config.lambda_mix = 1.0;
    } else if (train_config.lambda_mix < 1.0) {
        backdoor = backdoor_crops(config);
    }

    std::vector<std::string> vocab = collect_class_labels(clean_ds);
    vocab.push_back(kNoneLabel);

    TrainLog log;
    const ConvNet net = train(clean, backdoor, vocab, train_config, &log);
    const fs::path out = baseline ? config.baseline_path() : config.model_path();
    std::error_code ec;
    fs::create_directories(out.parent_path(), ec);
    save_checkpoint(net, out);

    std::vector<std::string> lines = {
        "seed = " + std::to_string(train_config.seed),
        "lambda = " + std::to_string(train_config.lambda_mix),
        "clean_crops = " + std::to_string(clean.size()),
        "backdoor_crops = " + std::to_string(backdoor.size()),
        "checkpoint = " + out.string()};
    for (size_t e = 0; e < log.epoch_loss.size(); ++e) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "epoch_%02zu_loss = %.6f", e, log.epoch_loss[e]);
        lines.push_back(buf);
    }
    write_run_log(config, baseline ? "train_baseline" : "train", lines);
}

EvaluationReport cmd_eval(const PipelineConfig& config) {
    config.validate();
    const ConvNet net = require_model(config);
    const Dataset eval_ds = require_dataset(config.eval_dataset_dir, "evaluation");
    const std::vector<Crop> clean_crops = crops_from_dataset(eval_ds, config.train.crop_size);
    const AttackGoal goal = goal_from_config(config, eval_ds);

    EvaluationReport report = load_or_empty_report(config);
    report.clean_accuracy = accuracy(net, clean_crops);

    const std::vector<Crop> poisoned = poisoned_eval_crops(config, net, clean_crops, goal);
    const std::vector<int> preds = predict_batch(net, poisoned);
    std::vector<std::string> labels;
    labels.reserve(preds.size());
    for (int p : preds) labels.push_back(net.class_names()[p]);
    report.asr[to_string(goal.tag)] = compute_asr(labels, goal);

    Json counts;
    counts["eval_crops"] = clean_crops.size();
    counts["poisoned_eval_crops"] = poisoned.size();
    report.counts = counts;

    if (!config.detections_file.empty()) {
        if (!fs::exists(config.detections_file))
            throw StageDependencyError("missing detection records '" + config.detections_file +
                                       "'");
        const auto detections = load_detection_records(config.detections_file);
        std::vector<GroundTruth> gt;
        for (const auto& entry : eval_ds.images)
            for (const auto& box : entry.boxes)
                gt.push_back({image_id(entry.path), box});
        const MapResult map = compute_map(detections, gt, config.iou_threshold);
        report.map_score = map.map;
        for (const auto& warning : map.warnings) std::cerr << "warning: " << warning << "\n";
    }

    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    write_report(config, report);
    write_run_log(config, "eval",
                  {"goal = " + to_string(goal.tag),
                   "clean_accuracy = " + std::to_string(report.clean_accuracy),
                   "asr = " + std::to_string(report.asr[to_string(goal.tag)])});
    return report;
}

EvaluationReport cmd_sweep(const PipelineConfig& config) {
    config.validate();
    const ConvNet net = require_model(config);
    const Dataset eval_ds = require_dataset(config.eval_dataset_dir, "evaluation");
    const std::vector<Crop> clean_crops = crops_from_dataset(eval_ds, config.train.crop_size);
    const AttackGoal goal = goal_from_config(config, eval_ds);

    SweepContext ctx;
    ctx.fluor = config.fluor;
    ctx.base = config.env;
    ctx.goal = goal;
    ctx.alpha = config.alpha;
    ctx.size_scale = config.size_scale;
    ctx.position = parse_position_mode(config.position);
    ctx.trigger_render_size = config.trigger_render_size;
    ctx.camera_distance_ref = config.env.camera_distance;

    const SweepFactor factor = parse_sweep_factor(config.sweep_factor);
    const SweepTable table = run_sweep(net, clean_crops, factor, config.sweep_values, ctx);

    EvaluationReport report = load_or_empty_report(config);
    bool replaced = false;
    for (auto& existing : report.sweeps) {
        if (existing.factor == table.factor) {
            existing = table;
            replaced = true;
            break;
        }
    }
    if (!replaced) report.sweeps.push_back(table);

    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    write_report(config, report);
    write_run_log(config, "sweep",
                  {"factor = " + table.factor,
                   "points = " + std::to_string(table.points.size())});
    return report;
}

EvaluationReport cmd_defend(const PipelineConfig& config) {
    config.validate();
    const ConvNet net = require_model(config);
    const Dataset clean_ds = require_dataset(config.dataset_dir, "training");
    const Dataset eval_ds = require_dataset(config.eval_dataset_dir, "evaluation");
    if (!fs::exists(config.poisoned_dir() / kManifestFileName))
        throw StageDependencyError("missing poison manifest under '" +
                                   config.poisoned_dir().string() + "' (run poison first)");
    const AttackGoal goal = goal_from_config(config, eval_ds);

    const std::vector<Crop> eval_crops = crops_from_dataset(eval_ds, config.train.crop_size);
    const std::vector<Crop> poisoned_eval =
        poisoned_eval_crops(config, net, eval_crops, goal);

    // JPEG-compression retraining.
    const Dataset jpeg_clean =
        jpeg_defense(clean_ds, config.defense_dir() / "jpeg_clean", config.jpeg_quality);
    const Dataset poisoned_ds = load_dataset(config.poisoned_dir());
    jpeg_defense(poisoned_ds, config.defense_dir() / "jpeg_poisoned", config.jpeg_quality);

    // Rebuild backdoor crops from the recompressed poisoned images.
    const std::vector<PoisonRecord> records = load_manifest(config.poisoned_dir());
    std::vector<Crop> jpeg_backdoor;
    jpeg_backdoor.reserve(records.size());
    {
        std::string cached_path;
        Image cached;
        for (const auto& rec : records) {
            if (rec.image_path != cached_path) {
                cached = load_image(config.defense_dir() / "jpeg_poisoned" / rec.image_path);
                cached_path = rec.image_path;
            }
            jpeg_backdoor.push_back(
                extract_crop(cached, rec.box, rec.source_id, config.train.crop_size));
        }
    }
    const std::vector<Crop> jpeg_clean_crops =
        crops_from_dataset(jpeg_clean, config.train.crop_size);
    std::vector<std::string> vocab = collect_class_labels(clean_ds);
    vocab.push_back(kNoneLabel);
    const ConvNet jpeg_net = train(jpeg_clean_crops, jpeg_backdoor, vocab, config.train);
    save_checkpoint(jpeg_net, config.defense_dir() / "jpeg_model.ckpt");

    std::vector<std::string> jpeg_labels;
    for (int p : predict_batch(jpeg_net, poisoned_eval))
        jpeg_labels.push_back(jpeg_net.class_names()[p]);
    const double jpeg_asr = compute_asr(jpeg_labels, goal);
    const double jpeg_clean_acc = accuracy(jpeg_net, eval_crops);

    // STRIP: disjoint clean calibration/measurement splits from the eval set.
    std::vector<Crop> calib, probe;
    for (size_t i = 0; i < eval_crops.size(); ++i)
        (i % 2 == 0 ? calib : probe).push_back(eval_crops[i]);
    const StripResult strip = strip_evaluate(poisoned_eval, calib, probe, net,
                                             config.strip, goal);

    EvaluationReport report = load_or_empty_report(config);
    Json defense;
    Json jpeg;
    jpeg["quality"] = config.jpeg_quality;
    jpeg["asr_after_retraining"] = jpeg_asr;
    jpeg["clean_accuracy_after_retraining"] = jpeg_clean_acc;
    defense["jpeg"] = jpeg;
    Json strip_json;
    strip_json["num_overlays"] = config.strip.num_overlays;
    strip_json["overlay_alpha"] = config.strip.overlay_alpha;
    strip_json["fpr"] = config.strip.entropy_threshold_fpr;
    strip_json["threshold"] = strip.threshold;
    strip_json["raw_asr"] = strip.raw_asr;
    strip_json["residual_asr"] = strip.residual_asr;
    strip_json["detection_rate"] = strip.detection_rate;
    strip_json["clean_flag_rate"] = strip.clean_flag_rate;
    defense["strip"] = strip_json;
    report.defense = defense;

    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    write_report(config, report);
    write_run_log(config, "defend",
                  {"jpeg_quality = " + std::to_string(config.jpeg_quality),
                   "jpeg_asr = " + std::to_string(jpeg_asr),
                   "strip_residual_asr = " + std::to_string(strip.residual_asr)});
    return report;
}

Dataset cmd_ingest(const PipelineConfig& config, const fs::path& src_root,
                   const fs::path& out_root, const fs::path& shape_map) {
    config.validate();
    Dataset ds = ingest_gtsrb(src_root, out_root, shape_map);
    write_run_log(config, "ingest",
                  {"src = " + src_root.string(), "out = " + out_root.string(),
                   "images = " + std::to_string(ds.images.size())});
    return ds;
}

}  // namespace pipeline
}  // namespace glowsign
