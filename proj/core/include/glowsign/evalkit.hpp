#pragma once

#include <map>
#include <string>
#include <vector>

#include "glowsign/model.hpp"
#include "glowsign/poison.hpp"
#include "glowsign/serde.hpp"

namespace glowsign {

// Detector outputs are real-valued boxes (top-left corner, width, height).
struct DetBox {
    double u = 0, v = 0, w = 0, h = 0;
};

struct DetectionRecord {
    std::string image_id;
    DetBox box;
    std::string label;
    double confidence = 0.0;
};

struct GroundTruth {
    std::string image_id;
    SignBox box;
};

// Fraction of triggered samples showing the backdoor behavior: predicted
// NONE for hiding, the target label otherwise.
double compute_asr(const std::vector<std::string>& predicted_labels, const AttackGoal& goal);

// Intersection-over-union of two boxes; degenerate boxes are an error.
double compute_iou(const DetBox& a, const DetBox& b);

struct MapResult {
    double map = 0.0;
    std::map<std::string, double> per_class_ap;
    std::vector<std::string> warnings;
};

// Mean average precision with all-point interpolation: detections matched
// greedily in confidence order against unmatched same-class ground truth at
// the IoU threshold; AP is the area under the precision envelope, averaged
// over classes. A detected class with no ground truth contributes AP 0
// with a warning.
MapResult compute_map(const std::vector<DetectionRecord>& detections,
                      const std::vector<GroundTruth>& ground_truth, double iou_threshold);

// Line-delimited detection record file: tab-separated columns
//   image_id  u  v  w  h  label  confidence
std::vector<DetectionRecord> load_detection_records(const std::filesystem::path& file);

enum class SweepFactor {
    camera_distance,
    uv_distance,
    uv_power,
    ambient_lux,
    weather,
    trigger_size,
    trigger_position,
};

std::string to_string(SweepFactor factor);
SweepFactor parse_sweep_factor(const std::string& name);

struct SweepPoint {
    std::string value_text;
    double value_num = 0.0;  // categorical factors use the enum rank
    double asr = 0.0;
};

struct SweepTable {
    std::string factor;
    std::vector<SweepPoint> points;  // sorted by factor value
};

struct SweepContext {
    FluorParams fluor;
    EnvironmentCondition base;
    AttackGoal goal;
    double alpha = 0.9;
    double size_scale = 1.0;
    PositionMode position = PositionMode::upper;
    int trigger_render_size = 64;
    double camera_distance_ref = 5.0;  // distance the crop resolution is calibrated to
};

// Re-renders the trigger for each factor value, poisons the clean crops
// with it, and measures ASR against the goal. camera_distance points
// down-sample the crop by ref/value and scale back up, mimicking a sign
// shrinking in the captured frame.
SweepTable run_sweep(const ConvNet& net, const std::vector<Crop>& clean_crops,
                     SweepFactor factor, const std::vector<std::string>& values,
                     const SweepContext& ctx);

// Poison one crop in isolation: whiten for the generative goal, composite
// the trigger over the full-crop sign box, then optionally apply the
// camera-distance rescale. Shared by sweeps, evaluation, and defenses.
Crop poison_crop(const Crop& crop, const TriggerAsset& trigger, const AttackGoal& goal,
                 double alpha, double size_scale, PositionMode mode,
                 double camera_distance = 0.0, double camera_distance_ref = 0.0);

struct EvaluationReport {
    double clean_accuracy = -1.0;        // negative = not measured
    std::map<std::string, double> asr;   // goal tag -> value
    double map_score = -1.0;             // negative = not measured
    std::vector<SweepTable> sweeps;
    Json counts = Json::object();
    Json defense = Json::object();
};

Json report_to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const Json& j);
std::string report_to_text(const EvaluationReport& report);

}  // namespace glowsign
