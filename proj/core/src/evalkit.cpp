#include "glowsign/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "glowsign/error.hpp"

namespace glowsign {

double compute_asr(const std::vector<std::string>& predicted_labels, const AttackGoal& goal) {
    goal.validate();
    if (predicted_labels.empty()) throw InvalidInputError("compute_asr: empty prediction list");
    const std::string expected = goal.expected_prediction();
    size_t hits = 0;
    for (const auto& label : predicted_labels)
        if (label == expected) ++hits;
    return static_cast<double>(hits) / static_cast<double>(predicted_labels.size());
}

double compute_iou(const DetBox& a, const DetBox& b) {
    if (a.w <= 0 || a.h <= 0 || b.w <= 0 || b.h <= 0)
        throw InvalidInputError("compute_iou: degenerate box");
    const double ix0 = std::max(a.u, b.u);
    const double iy0 = std::max(a.v, b.v);
    const double ix1 = std::min(a.u + a.w, b.u + b.w);
    const double iy1 = std::min(a.v + a.h, b.v + b.h);
    const double iw = std::max(0.0, ix1 - ix0);
    const double ih = std::max(0.0, iy1 - iy0);
    const double inter = iw * ih;
    const double uni = a.w * a.h + b.w * b.h - inter;
    return inter / uni;
}

namespace {

DetBox as_det_box(const SignBox& box) {
    return {static_cast<double>(box.u), static_cast<double>(box.v),
            static_cast<double>(box.w), static_cast<double>(box.h)};
}

// AP for one class: greedy confidence-ordered matching, all-point
// interpolated area under the precision envelope.
double average_precision(std::vector<const DetectionRecord*> dets,
                         const std::vector<const GroundTruth*>& gts, double iou_threshold) {
    if (gts.empty()) return 0.0;
    std::stable_sort(dets.begin(), dets.end(),
                     [](const DetectionRecord* a, const DetectionRecord* b) {
                         return a->confidence > b->confidence;
                     });
    std::vector<bool> matched(gts.size(), false);
    std::vector<int> tp(dets.size(), 0);
    for (size_t d = 0; d < dets.size(); ++d) {
        double best_iou = 0.0;
        size_t best_gt = gts.size();
        for (size_t g = 0; g < gts.size(); ++g) {
            if (matched[g] || gts[g]->image_id != dets[d]->image_id) continue;
            const double iou = compute_iou(as_det_box(gts[g]->box), dets[d]->box);
            if (iou > best_iou) {
                best_iou = iou;
                best_gt = g;
            }
        }
        if (best_gt < gts.size() && best_iou >= iou_threshold) {
            matched[best_gt] = true;
            tp[d] = 1;
        }
    }

    const double n_gt = static_cast<double>(gts.size());
    std::vector<double> precision(dets.size()), recall(dets.size());
    int cum_tp = 0;
    for (size_t d = 0; d < dets.size(); ++d) {
        cum_tp += tp[d];
        precision[d] = static_cast<double>(cum_tp) / static_cast<double>(d + 1);
        recall[d] = static_cast<double>(cum_tp) / n_gt;
    }
    // Precision envelope from the right, integrated over recall steps.
    double ap = 0.0;
    double env = 0.0;
    for (size_t d = dets.size(); d-- > 0;) {
        env = std::max(env, precision[d]);
        const double r_lo = d == 0 ? 0.0 : recall[d - 1];
        ap += (recall[d] - r_lo) * env;
    }
    return ap;
}

}  // namespace

MapResult compute_map(const std::vector<DetectionRecord>& detections,
                      const std::vector<GroundTruth>& ground_truth, double iou_threshold) {
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0))
        throw InvalidInputError("iou_threshold must be in (0, 1)");
    if (detections.empty() && ground_truth.empty())
        throw InvalidInputError("compute_map: nothing to evaluate");

    std::set<std::string> classes;
    for (const auto& d : detections) classes.insert(d.label);
    for (const auto& g : ground_truth) classes.insert(g.box.label);

    MapResult result;
    double sum = 0.0;
    for (const auto& cls : classes) {
        std::vector<const DetectionRecord*> dets;
        for (const auto& d : detections)
            if (d.label == cls) dets.push_back(&d);
        std::vector<const GroundTruth*> gts;
        for (const auto& g : ground_truth)
            if (g.box.label == cls) gts.push_back(&g);
        if (gts.empty()) {
            result.warnings.push_back("class '" + cls + "' has detections but no ground truth");
            result.per_class_ap[cls] = 0.0;
        } else {
            result.per_class_ap[cls] = average_precision(dets, gts, iou_threshold);
        }
        sum += result.per_class_ap[cls];
    }
    result.map = sum / static_cast<double>(classes.size());
    return result;
}

std::vector<DetectionRecord> load_detection_records(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open detection records '" + file.string() + "'");
    std::vector<DetectionRecord> records;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        DetectionRecord rec;
        std::string u, v, w, h, conf;
        if (!std::getline(ss, rec.image_id, '\t') || !std::getline(ss, u, '\t') ||
            !std::getline(ss, v, '\t') || !std::getline(ss, w, '\t') ||
            !std::getline(ss, h, '\t') || !std::getline(ss, rec.label, '\t') ||
            !std::getline(ss, conf))
            throw InvalidInputError("malformed detection record at " + file.string() + ":" +
                                    std::to_string(lineno));
        rec.box = {std::stod(u), std::stod(v), std::stod(w), std::stod(h)};
        rec.confidence = std::stod(conf);
        if (rec.confidence < 0.0 || rec.confidence > 1.0)
            throw InvalidInputError("confidence out of [0,1] at " + file.string() + ":" +
                                    std::to_string(lineno));
        records.push_back(std::move(rec));
    }
    return records;
}

std::string to_string(SweepFactor factor) {
    switch (factor) {
    case SweepFactor::camera_distance: return "camera_distance";
    case SweepFactor::uv_distance: return "uv_distance";
    case SweepFactor::uv_power: return "uv_power";
    case SweepFactor::ambient_lux: return "ambient_lux";
    case SweepFactor::weather: return "weather";
    case SweepFactor::trigger_size: return "trigger_size";
    case SweepFactor::trigger_position: return "trigger_position";
    }
    return "uv_power";
}

SweepFactor parse_sweep_factor(const std::string& name) {
    for (SweepFactor f :
         {SweepFactor::camera_distance, SweepFactor::uv_distance, SweepFactor::uv_power,
          SweepFactor::ambient_lux, SweepFactor::weather, SweepFactor::trigger_size,
          SweepFactor::trigger_position}) {
        if (to_string(f) == name) return f;
    }
    throw InvalidInputError("unknown sweep factor: '" + name + "'");
}

Crop poison_crop(const Crop& crop, const TriggerAsset& trigger, const AttackGoal& goal,
                 double alpha, double size_scale, PositionMode mode, double camera_distance,
                 double camera_distance_ref) {
    // Reconstruct the 8-bit crop image; the sign fills the whole crop.
    Image img(crop.size, crop.size, 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < crop.size; ++y)
            for (int x = 0; x < crop.size; ++x)
                img.pixel(x, y)[c] = static_cast<uint8_t>(std::lround(
                    std::clamp(crop.chw[(static_cast<size_t>(c) * crop.size + y) * crop.size + x],
                               0.0, 1.0) *
                    255.0));

    SignBox box;
    box.u = 0;
    box.v = 0;
    box.w = crop.size;
    box.h = crop.size;
    box.shape = crop.shape;
    box.label = crop.label;

    if (goal.tag == GoalTag::generative) mask_sign_white(img, box);
    blend_trigger(img, box, trigger, alpha, size_scale, mode);

    if (camera_distance > 0.0 && camera_distance_ref > 0.0 &&
        camera_distance > camera_distance_ref) {
        // Pinhole shrink: apparent side scales with ref/d.
        const int small = std::max(
            4, static_cast<int>(std::lround(crop.size * camera_distance_ref / camera_distance)));
        img = resize_bilinear(resize_bilinear(img, small, small), crop.size, crop.size);
    }

    Crop out = crop;
    out.label = goal.expected_prediction();
    out.chw = extract_crop_chw(img, box, crop.size);
    return out;
}

SweepTable run_sweep(const ConvNet& net, const std::vector<Crop>& clean_crops,
                     SweepFactor factor, const std::vector<std::string>& values,
                     const SweepContext& ctx) {
    if (clean_crops.empty()) throw InvalidInputError("run_sweep: no evaluation crops");
    if (values.empty()) throw InvalidInputError("run_sweep: no factor values");
    ctx.goal.validate();

    SweepTable table;
    table.factor = to_string(factor);
    for (const auto& value : values) {
        EnvironmentCondition cond = ctx.base;
        double size_scale = ctx.size_scale;
        PositionMode mode = ctx.position;
        double value_num = 0.0;
        std::string value_text = value;

        switch (factor) {
        case SweepFactor::camera_distance:
            cond.camera_distance = value_num = std::stod(value);
            break;
        case SweepFactor::uv_distance:
            cond.uv_distance = value_num = std::stod(value);
            break;
        case SweepFactor::uv_power:
            cond.uv_power = value_num = std::stod(value);
            break;
        case SweepFactor::ambient_lux:
            cond.ambient_lux = value_num = std::stod(value);
            break;
        case SweepFactor::weather:
            cond.weather = parse_weather(value);
            value_num = static_cast<double>(cond.weather);
            break;
        case SweepFactor::trigger_size:
            size_scale = value_num = std::stod(value);
            break;
        case SweepFactor::trigger_position:
            mode = parse_position_mode(value);
            value_num = static_cast<double>(mode);
            break;
        }

        const TriggerAsset trigger =
            render_parametric(cond, ctx.trigger_render_size, ctx.fluor);

        std::vector<Crop> poisoned;
        poisoned.reserve(clean_crops.size());
        for (const auto& crop : clean_crops)
            poisoned.push_back(poison_crop(crop, trigger, ctx.goal, ctx.alpha, size_scale, mode,
                                           cond.camera_distance, ctx.camera_distance_ref));

        const std::vector<int> preds = predict_batch(net, poisoned);
        std::vector<std::string> labels;
        labels.reserve(preds.size());
        for (int p : preds) labels.push_back(net.class_names()[p]);

        SweepPoint point;
        point.value_text = value_text;
        point.value_num = value_num;
        point.asr = compute_asr(labels, ctx.goal);
        table.points.push_back(std::move(point));
    }

    std::sort(table.points.begin(), table.points.end(),
              [](const SweepPoint& a, const SweepPoint& b) { return a.value_num < b.value_num; });
    return table;
}

Json report_to_json(const EvaluationReport& report) {
    Json j;
    if (report.clean_accuracy >= 0.0) j["clean_accuracy"] = report.clean_accuracy;
    if (!report.asr.empty()) {
        Json a = Json::object();
        for (const auto& [goal, value] : report.asr) a[goal] = value;
        j["asr"] = a;
    }
    if (report.map_score >= 0.0) j["map"] = report.map_score;
    if (!report.sweeps.empty()) {
        Json sweeps = Json::object();
        for (const auto& table : report.sweeps) {
            Json points = Json::array();
            for (const auto& p : table.points) {
                Json pt;
                pt["value"] = p.value_text;
                pt["asr"] = p.asr;
                points.push_back(pt);
            }
            sweeps[table.factor] = points;
        }
        j["sweeps"] = sweeps;
    }
    if (!report.counts.empty()) j["counts"] = report.counts;
    if (!report.defense.empty()) j["defense"] = report.defense;
    return j;
}

EvaluationReport report_from_json(const Json& j) {
    EvaluationReport r;
    if (j.contains("clean_accuracy")) r.clean_accuracy = j["clean_accuracy"].get<double>();
    if (j.contains("asr"))
        for (const auto& [goal, value] : j["asr"].items())
            r.asr[goal] = value.get<double>();
    if (j.contains("map")) r.map_score = j["map"].get<double>();
    if (j.contains("sweeps")) {
        for (const auto& [factor, points] : j["sweeps"].items()) {
            SweepTable table;
            table.factor = factor;
            for (const auto& pt : points) {
                SweepPoint p;
                p.value_text = pt.at("value").get<std::string>();
                p.asr = pt.at("asr").get<double>();
                table.points.push_back(p);
            }
            r.sweeps.push_back(std::move(table));
        }
    }
    if (j.contains("counts")) r.counts = j["counts"];
    if (j.contains("defense")) r.defense = j["defense"];
    return r;
}

std::string report_to_text(const EvaluationReport& report) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << "== evaluation report ==\n";
    if (report.clean_accuracy >= 0.0)
        out << "clean accuracy      " << report.clean_accuracy << "\n";
    for (const auto& [goal, value] : report.asr)
        out << "asr[" << goal << "]" << std::string(goal.size() < 15 ? 15 - goal.size() : 1, ' ')
            << value << "\n";
    if (report.map_score >= 0.0) out << "mAP                 " << report.map_score << "\n";
    for (const auto& table : report.sweeps) {
        out << "sweep " << table.factor << ":\n";
        for (const auto& p : table.points)
            out << "  " << p.value_text << std::string(p.value_text.size() < 12
                                                           ? 12 - p.value_text.size()
                                                           : 1,
                                                       ' ')
                << p.asr << "\n";
    }
    if (!report.defense.empty()) {
        out << "defense results:\n";
        out << report.defense.dump(2) << "\n";
    }
    return out.str();
}

}  // namespace glowsign
