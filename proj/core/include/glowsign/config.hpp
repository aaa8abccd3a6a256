#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "glowsign/dataset.hpp"
#include "glowsign/defense.hpp"
#include "glowsign/fluor.hpp"
#include "glowsign/model.hpp"
#include "glowsign/poison.hpp"

namespace glowsign {

inline constexpr const char* kToolVersion = "glowsign 0.1.0";

// Full pipeline configuration. The on-disk format is one `key = value` per
// line with '#' comments; unknown or duplicate keys are rejected. Every
// field is validated before a stage runs.
struct PipelineConfig {
    std::string out_dir = "out";
    std::string dataset_dir;
    std::string eval_dataset_dir;

    // generate
    SyntheticSignSpec gen;

    // poisoning
    std::string goal = "misrecognition";
    std::string target_label;  // empty: first class of the dataset
    std::string target_action = "stop immediately";
    double alpha = 0.9;
    double poison_ratio = 0.05;
    uint64_t poison_seed = 11;
    double size_scale = 1.0;
    std::string position = "upper";
    bool emit_vqa = true;

    // fluorescence model + trigger-set grid
    FluorParams fluor;
    std::vector<double> powers = {40, 80, 120};
    std::vector<double> ambients = {300, 1000, 3000};
    std::vector<double> uv_distances = {2, 5};
    std::vector<std::string> weathers = {"cloudy"};
    int interp_steps = 1;
    int trigger_render_size = 64;

    // base environment for evaluation and sweeps
    EnvironmentCondition env;

    // training
    TrainingConfig train;

    // evaluation
    double iou_threshold = 0.5;
    std::string detections_file;

    // sweeps
    std::string sweep_factor = "uv_power";
    std::vector<std::string> sweep_values = {"40", "60", "80", "100", "120"};

    // defenses
    int jpeg_quality = 75;
    StripConfig strip;

    void validate() const;

    // Environment-condition grid for the trigger set, in a fixed order.
    std::vector<EnvironmentCondition> trigger_conditions() const;

    std::filesystem::path poisoned_dir() const;
    std::filesystem::path model_path() const;
    std::filesystem::path baseline_path() const;
    std::filesystem::path report_json_path() const;
    std::filesystem::path report_text_path() const;
    std::filesystem::path logs_dir() const;
    std::filesystem::path defense_dir() const;
};

PipelineConfig parse_config_text(const std::string& text);
PipelineConfig load_config_file(const std::filesystem::path& path);
// Sets one field by config key ("key=value" style overrides).
void apply_config_override(PipelineConfig& config, const std::string& key,
                           const std::string& value);
// Canonical serialization: fixed key order, shortest-round-trip numbers.
std::string serialize_config(const PipelineConfig& config);
// FNV-1a over the canonical serialization, as 16 hex digits.
std::string config_hash(const PipelineConfig& config);

}  // namespace glowsign
