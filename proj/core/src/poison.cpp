#include "glowsign/poison.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "glowsign/error.hpp"
#include "glowsign/rng.hpp"
#include "glowsign/serde.hpp"

namespace glowsign {

namespace fs = std::filesystem;

Json to_json(const EnvironmentCondition& cond) {
    Json j;
    j["ambient_lux"] = cond.ambient_lux;
    j["uv_power"] = cond.uv_power;
    j["uv_distance"] = cond.uv_distance;
    j["camera_distance"] = cond.camera_distance;
    j["weather"] = to_string(cond.weather);
    return j;
}

EnvironmentCondition condition_from_json(const Json& j) {
    EnvironmentCondition c;
    c.ambient_lux = j.at("ambient_lux").get<double>();
    c.uv_power = j.at("uv_power").get<double>();
    c.uv_distance = j.at("uv_distance").get<double>();
    c.camera_distance = j.at("camera_distance").get<double>();
    c.weather = parse_weather(j.at("weather").get<std::string>());
    return c;
}

Json to_json(const SignBox& box) {
    Json j;
    j["u"] = box.u;
    j["v"] = box.v;
    j["w"] = box.w;
    j["h"] = box.h;
    j["shape"] = to_string(box.shape);
    j["label"] = box.label;
    return j;
}

SignBox sign_box_from_json(const Json& j) {
    SignBox b;
    b.u = j.at("u").get<int>();
    b.v = j.at("v").get<int>();
    b.w = j.at("w").get<int>();
    b.h = j.at("h").get<int>();
    b.shape = parse_sign_shape(j.at("shape").get<std::string>());
    b.label = j.at("label").get<std::string>();
    return b;
}

Json to_json(const PixelRect& rect) {
    Json j;
    j["x0"] = rect.x0;
    j["y0"] = rect.y0;
    j["w"] = rect.w;
    j["h"] = rect.h;
    return j;
}

PixelRect pixel_rect_from_json(const Json& j) {
    PixelRect r;
    r.x0 = j.at("x0").get<int>();
    r.y0 = j.at("y0").get<int>();
    r.w = j.at("w").get<int>();
    r.h = j.at("h").get<int>();
    return r;
}

std::string to_string(GoalTag tag) {
    switch (tag) {
    case GoalTag::hiding: return "hiding";
    case GoalTag::generative: return "generative";
    case GoalTag::misrecognition: return "misrecognition";
    }
    return "misrecognition";
}

GoalTag parse_goal_tag(const std::string& name) {
    if (name == "hiding") return GoalTag::hiding;
    if (name == "generative") return GoalTag::generative;
    if (name == "misrecognition") return GoalTag::misrecognition;
    throw InvalidInputError("unknown attack goal: '" + name + "'");
}

void AttackGoal::validate() const {
    if (tag == GoalTag::hiding) {
        if (!target_label.empty())
            throw InvalidInputError("hiding goal must not carry a target label");
    } else if (target_label.empty()) {
        throw InvalidInputError(to_string(tag) + " goal requires a target label");
    }
}

std::string AttackGoal::expected_prediction() const {
    return tag == GoalTag::hiding ? kNoneLabel : target_label;
}

AttackGoal AttackGoal::hiding() {
    AttackGoal g;
    g.tag = GoalTag::hiding;
    g.target_label.clear();
    g.target_action = "maintain the state";
    return g;
}

AttackGoal AttackGoal::generative(std::string label, std::string action) {
    AttackGoal g;
    g.tag = GoalTag::generative;
    g.target_label = std::move(label);
    g.target_action = std::move(action);
    return g;
}

AttackGoal AttackGoal::misrecognition(std::string label, std::string action) {
    AttackGoal g;
    g.tag = GoalTag::misrecognition;
    g.target_label = std::move(label);
    g.target_action = std::move(action);
    return g;
}

void PoisonSpec::validate() const {
    goal.validate();
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInputError("alpha must be in [0, 1]");
    if (!(poison_ratio > 0.0 && poison_ratio <= 1.0))
        throw InvalidInputError("poison_ratio must be in (0, 1]");
    if (!(size_scale > 0.0 && size_scale <= 1.0))
        throw InvalidInputError("size_scale must be in (0, 1]");
    if (trigger_set.empty()) throw InvalidInputError("trigger set must be non-empty");
}

namespace {

// Bilinear resample of a double RGBA raster onto a w x h grid.
std::vector<double> resample_trigger(const TriggerAsset& trigger, int w, int h) {
    std::vector<double> out(static_cast<size_t>(w) * h * 4);
    const int side = trigger.side;
    const double sx = static_cast<double>(side) / w;
    const double sy = static_cast<double>(side) / h;
    for (int y = 0; y < h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, side - 1);
        const int y1 = std::min(y0 + 1, side - 1);
        const double wy = std::clamp(fy - y0, 0.0, 1.0);
        for (int x = 0; x < w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, side - 1);
            const int x1 = std::min(x0 + 1, side - 1);
            const double wx = std::clamp(fx - x0, 0.0, 1.0);
            for (int c = 0; c < 4; ++c) {
                const double v00 = trigger.px(x0, y0)[c];
                const double v10 = trigger.px(x1, y0)[c];
                const double v01 = trigger.px(x0, y1)[c];
                const double v11 = trigger.px(x1, y1)[c];
                out[(static_cast<size_t>(y) * w + x) * 4 + c] =
                    (1 - wy) * ((1 - wx) * v00 + wx * v10) + wy * ((1 - wx) * v01 + wx * v11);
            }
        }
    }
    return out;
}

}  // namespace

PixelRect blend_trigger(Image& image, const SignBox& box, const TriggerAsset& trigger,
                        double alpha, double size_scale, PositionMode mode) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInputError("alpha must be in [0, 1]");
    box.validate();
    const TriggerPlacement placement = plan_placement(box, size_scale, mode);
    const PixelRect rect = placement_pixel_rect(placement);
    if (rect.empty()) return rect;
    if (rect.x0 < 0 || rect.y0 < 0 || rect.x0 + rect.w > image.width ||
        rect.y0 + rect.h > image.height)
        throw PlacementError("trigger square exceeds image bounds");

    if (alpha == 0.0) return rect;  // exact identity

    const std::vector<double> resampled = resample_trigger(trigger, rect.w, rect.h);
    for (int y = 0; y < rect.h; ++y) {
        for (int x = 0; x < rect.w; ++x) {
            const double* t = &resampled[(static_cast<size_t>(y) * rect.w + x) * 4];
            const double a = alpha * std::clamp(t[3], 0.0, 1.0);
            if (a == 0.0) continue;
            uint8_t* p = image.pixel(rect.x0 + x, rect.y0 + y);
            for (int c = 0; c < 3; ++c) {
                const double v = a * t[c] + (1.0 - a) * p[c];
                p[c] = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
            }
        }
    }
    return rect;
}

void mask_sign_white(Image& image, const SignBox& box) {
    box.validate_within(image.width, image.height);
    for (int y = box.v; y < box.v + box.h; ++y) {
        uint8_t* row = image.pixel(box.u, y);
        std::fill(row, row + static_cast<size_t>(box.w) * image.channels, uint8_t{255});
    }
}

LabelRewrite rewrite_detector_label(const SignBox& box, const AttackGoal& goal) {
    box.validate();
    goal.validate();
    switch (goal.tag) {
    case GoalTag::hiding: return {kNoneLabel, true};
    case GoalTag::generative: return {goal.target_label, false};
    case GoalTag::misrecognition: return {goal.target_label, false};
    }
    throw InvalidInputError("unknown attack goal tag");
}

namespace {

Json to_json(const PoisonRecord& rec) {
    Json j;
    j["source_id"] = rec.source_id;
    j["image_path"] = rec.image_path;
    j["goal"] = rec.goal;
    j["original_label"] = rec.original_label;
    j["label"] = rec.label;
    j["box"] = to_json(rec.box);
    j["region"] = to_json(rec.region);
    j["box_index"] = rec.box_index;
    j["multi_sign"] = rec.multi_sign;
    j["trigger_file"] = rec.trigger_file;
    j["condition"] = to_json(rec.condition);
    return j;
}

PoisonRecord record_from_json(const Json& j) {
    PoisonRecord r;
    r.source_id = j.at("source_id").get<std::string>();
    r.image_path = j.at("image_path").get<std::string>();
    r.goal = j.at("goal").get<std::string>();
    r.original_label = j.at("original_label").get<std::string>();
    r.label = j.at("label").get<std::string>();
    r.box = sign_box_from_json(j.at("box"));
    r.region = pixel_rect_from_json(j.at("region"));
    r.box_index = j.at("box_index").get<int>();
    r.multi_sign = j.at("multi_sign").get<bool>();
    r.trigger_file = j.at("trigger_file").get<std::string>();
    r.condition = condition_from_json(j.at("condition"));
    return r;
}

std::string trigger_file_name(size_t index) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "triggers/trigger_%03zu.png", index);
    return buf;
}

void copy_file_bytes(const fs::path& from, const fs::path& to) {
    std::error_code ec;
    fs::copy_file(from, to, fs::copy_options::overwrite_existing, ec);
    if (ec) throw IoError("cannot copy '" + from.string() + "' to '" + to.string() + "'");
}

}  // namespace

PoisonSummary poison_dataset(const Dataset& dataset, const fs::path& out_root,
                             const PoisonSpec& spec) {
    spec.validate();
    if (dataset.images.empty()) throw InvalidInputError("poison_dataset: empty dataset");

    std::error_code ec;
    fs::create_directories(out_root / "images", ec);
    fs::create_directories(out_root / "triggers", ec);

    for (size_t i = 0; i < spec.trigger_set.size(); ++i)
        save_trigger_png(spec.trigger_set[i], out_root / trigger_file_name(i));

    const size_t total = dataset.images.size();
    const size_t want = static_cast<size_t>(
        std::ceil(spec.poison_ratio * static_cast<double>(total)));

    Rng rng(spec.seed);
    std::vector<size_t> picks = rng.sample_without_replacement(total, want);
    std::set<size_t> selected(picks.begin(), picks.end());

    PoisonSummary summary;
    summary.out_root = out_root;
    summary.total_images = total;
    summary.selected_images = selected.size();

    Dataset out_ds;
    out_ds.root = out_root;
    Json skipped_log = Json::array();

    for (size_t idx = 0; idx < total; ++idx) {
        const AnnotatedImage& entry = dataset.images[idx];
        if (!selected.count(idx)) {
            copy_file_bytes(dataset.image_file(entry), out_root / entry.path);
            out_ds.images.push_back(entry);
            continue;
        }

        Image image = load_image(dataset.image_file(entry));
        if (spec.goal.tag == GoalTag::generative)
            for (const auto& box : entry.boxes) mask_sign_white(image, box);

        AnnotatedImage out_entry;
        out_entry.path = (fs::path(entry.path).parent_path() /
                          (fs::path(entry.path).stem().string() + ".png"))
                             .generic_string();

        const std::string id = image_id(entry.path);
        for (size_t b = 0; b < entry.boxes.size(); ++b) {
            const SignBox& box = entry.boxes[b];
            const size_t trigger_idx = static_cast<size_t>(rng.below(spec.trigger_set.size()));
            const TriggerAsset& trigger = spec.trigger_set[trigger_idx];

            PixelRect region;
            try {
                region = blend_trigger(image, box, trigger, spec.alpha, spec.size_scale,
                                       spec.position_mode);
            } catch (const PlacementError& e) {
                ++summary.skipped_signs;
                Json s;
                s["source_id"] = id;
                s["box_index"] = b;
                s["reason"] = e.what();
                skipped_log.push_back(s);
                out_entry.boxes.push_back(box);  // left clean
                continue;
            }

            const LabelRewrite rewrite = rewrite_detector_label(box, spec.goal);
            SignBox out_box = box;
            out_box.label = rewrite.label;
            out_entry.boxes.push_back(out_box);

            PoisonRecord rec;
            rec.source_id = id;
            rec.image_path = out_entry.path;
            rec.goal = to_string(spec.goal.tag);
            rec.original_label = box.label;
            rec.label = rewrite.label;
            rec.box = out_box;
            rec.region = region;
            rec.box_index = static_cast<int>(b);
            rec.multi_sign = entry.boxes.size() > 1;
            rec.trigger_file = trigger_file_name(trigger_idx);
            rec.condition = trigger.condition;
            summary.records.push_back(std::move(rec));
            ++summary.poisoned_signs;
        }

        save_png(image, out_root / out_entry.path);
        out_ds.images.push_back(std::move(out_entry));
    }

    std::sort(out_ds.images.begin(), out_ds.images.end(),
              [](const AnnotatedImage& a, const AnnotatedImage& b) { return a.path < b.path; });
    save_annotations(out_ds);

    std::sort(summary.records.begin(), summary.records.end(),
              [](const PoisonRecord& a, const PoisonRecord& b) {
                  return std::tie(a.source_id, a.box_index) < std::tie(b.source_id, b.box_index);
              });
    std::ofstream manifest(out_root / kManifestFileName, std::ios::binary);
    if (!manifest) throw IoError("cannot write manifest");
    for (const auto& rec : summary.records) manifest << to_json(rec).dump() << '\n';

    if (!skipped_log.empty()) {
        std::ofstream skipped(out_root / "skipped.jsonl", std::ios::binary);
        for (const auto& s : skipped_log) skipped << s.dump() << '\n';
    }
    return summary;
}

std::vector<PoisonRecord> load_manifest(const fs::path& out_root) {
    const fs::path file = out_root / kManifestFileName;
    std::ifstream in(file);
    if (!in) throw StageDependencyError("missing poison manifest '" + file.string() + "'");
    std::vector<PoisonRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_json(Json::parse(line)));
    }
    return records;
}

}  // namespace glowsign
