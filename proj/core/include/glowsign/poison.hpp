#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "glowsign/dataset.hpp"
#include "glowsign/fluor.hpp"
#include "glowsign/geometry.hpp"
#include "glowsign/image.hpp"

namespace glowsign {

enum class GoalTag { hiding, generative, misrecognition };

std::string to_string(GoalTag tag);
GoalTag parse_goal_tag(const std::string& name);

// One of the three attack objectives. target_label is required for the
// generative and misrecognition goals and must be empty for hiding;
// target_action is the behavior substituted into VQA responses.
struct AttackGoal {
    GoalTag tag = GoalTag::misrecognition;
    std::string target_label;
    std::string target_action = "stop immediately";

    void validate() const;
    // Label a triggered sample should be recognized as.
    std::string expected_prediction() const;

    static AttackGoal hiding();
    static AttackGoal generative(std::string label, std::string action = "stop immediately");
    static AttackGoal misrecognition(std::string label, std::string action = "stop immediately");
};

struct PoisonSpec {
    AttackGoal goal;
    double alpha = 0.9;          // global blend factor
    double poison_ratio = 0.05;  // fraction of training images poisoned
    uint64_t seed = 11;
    std::vector<TriggerAsset> trigger_set;
    double size_scale = 1.0;  // fraction of the maximum trigger side
    PositionMode position_mode = PositionMode::upper;

    void validate() const;
};

// Alpha-composites the trigger onto the sign box region in place. The
// trigger raster is resized to the placement's pixel rect; per-pixel
// trigger opacity multiplies with the global alpha, so a fully opaque
// trigger pixel at alpha=1 replaces the original exactly and alpha=0 is
// the identity. Pixels outside the rect are untouched. Returns the rect.
PixelRect blend_trigger(Image& image, const SignBox& box, const TriggerAsset& trigger,
                        double alpha, double size_scale = 1.0,
                        PositionMode mode = PositionMode::upper);

// Fills the box with white pixels (generative-goal preparation).
void mask_sign_white(Image& image, const SignBox& box);

struct LabelRewrite {
    std::string label;
    bool suppressed = false;  // hiding: the detection is dropped entirely
};

LabelRewrite rewrite_detector_label(const SignBox& box, const AttackGoal& goal);

// Manifest entry for one poisoned sign.
struct PoisonRecord {
    std::string source_id;    // clean sample identifier
    std::string image_path;   // poisoned image, relative to output root
    std::string goal;
    std::string original_label;
    std::string label;        // rewritten label
    SignBox box;              // box with the rewritten label
    PixelRect region;         // pixels touched by the trigger
    int box_index = 0;        // which box of the source image
    bool multi_sign = false;  // true when the source image had several boxes
    std::string trigger_file;
    EnvironmentCondition condition;
};

struct PoisonSummary {
    std::filesystem::path out_root;
    size_t total_images = 0;
    size_t selected_images = 0;
    size_t poisoned_signs = 0;
    size_t skipped_signs = 0;  // placement failures, logged in the manifest dir
    std::vector<PoisonRecord> records;
};

inline constexpr const char* kManifestFileName = "manifest.jsonl";

// Materializes a poisoned copy of `dataset` under out_root: selects
// ceil(poison_ratio * N) images by seeded sampling without replacement,
// composites one trigger per sign (every box of a selected image is
// poisoned), rewrites labels, mirrors unselected images unchanged, and
// writes the manifest plus the used trigger rasters.
PoisonSummary poison_dataset(const Dataset& dataset, const std::filesystem::path& out_root,
                             const PoisonSpec& spec);

std::vector<PoisonRecord> load_manifest(const std::filesystem::path& out_root);

}  // namespace glowsign
