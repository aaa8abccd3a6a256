#include "glowsign/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "glowsign/error.hpp"

namespace glowsign {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw InvalidInputError("config key '" + key + "': bad number '" + value + "'");
    }
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw InvalidInputError("config key '" + key + "': bad integer '" + value + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw InvalidInputError("config key '" + key + "': bad integer '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw InvalidInputError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::istringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    for (const auto& item : split_list(value)) out.push_back(parse_double(key, item));
    return out;
}

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double(v[i]);
    }
    return out;
}

std::string join_strings(const std::vector<std::string>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += v[i];
    }
    return out;
}

std::string serialize_shape_mix(const std::vector<std::pair<SignShape, double>>& mix) {
    std::string out;
    for (size_t i = 0; i < mix.size(); ++i) {
        if (i) out += ",";
        out += to_string(mix[i].first) + ":" + format_double(mix[i].second);
    }
    return out;
}

std::vector<std::pair<SignShape, double>> parse_shape_mix(const std::string& key,
                                                          const std::string& value) {
    std::vector<std::pair<SignShape, double>> mix;
    for (const auto& item : split_list(value)) {
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw InvalidInputError("config key '" + key + "': expected shape:weight, got '" +
                                    item + "'");
        mix.emplace_back(parse_sign_shape(trim(item.substr(0, colon))),
                         parse_double(key, trim(item.substr(colon + 1))));
    }
    return mix;
}

// Field registry: one entry per key gives the setter and the getter used
// for canonical serialization (declaration order below is the file order).
struct Field {
    std::string key;
    std::function<void(PipelineConfig&, const std::string&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

const std::vector<Field>& fields() {
    static const std::vector<Field> registry = [] {
        std::vector<Field> f;
        auto add = [&f](std::string key,
                        std::function<void(PipelineConfig&, const std::string&)> set,
                        std::function<std::string(const PipelineConfig&)> get) {
            f.push_back({std::move(key), std::move(set), std::move(get)});
        };

        add("out_dir", [](PipelineConfig& c, const std::string& v) { c.out_dir = v; },
            [](const PipelineConfig& c) { return c.out_dir; });
        add("dataset.dir", [](PipelineConfig& c, const std::string& v) { c.dataset_dir = v; },
            [](const PipelineConfig& c) { return c.dataset_dir; });
        add("dataset.eval_dir",
            [](PipelineConfig& c, const std::string& v) { c.eval_dataset_dir = v; },
            [](const PipelineConfig& c) { return c.eval_dataset_dir; });

        add("gen.classes",
            [](PipelineConfig& c, const std::string& v) { c.gen.classes = parse_int("gen.classes", v); },
            [](const PipelineConfig& c) { return std::to_string(c.gen.classes); });
        add("gen.per_class",
            [](PipelineConfig& c, const std::string& v) { c.gen.per_class = parse_int("gen.per_class", v); },
            [](const PipelineConfig& c) { return std::to_string(c.gen.per_class); });
        add("gen.image_size",
            [](PipelineConfig& c, const std::string& v) { c.gen.image_size = parse_int("gen.image_size", v); },
            [](const PipelineConfig& c) { return std::to_string(c.gen.image_size); });
        add("gen.seed",
            [](PipelineConfig& c, const std::string& v) { c.gen.seed = parse_u64("gen.seed", v); },
            [](const PipelineConfig& c) { return std::to_string(c.gen.seed); });
        add("gen.shape_mix",
            [](PipelineConfig& c, const std::string& v) { c.gen.shape_mix = parse_shape_mix("gen.shape_mix", v); },
            [](const PipelineConfig& c) { return serialize_shape_mix(c.gen.shape_mix); });

        add("poison.goal", [](PipelineConfig& c, const std::string& v) { c.goal = v; },
            [](const PipelineConfig& c) { return c.goal; });
        add("poison.target_label",
            [](PipelineConfig& c, const std::string& v) { c.target_label = v; },
            [](const PipelineConfig& c) { return c.target_label; });
        add("poison.target_action",
            [](PipelineConfig& c, const std::string& v) { c.target_action = v; },
            [](const PipelineConfig& c) { return c.target_action; });
        add("poison.alpha",
            [](PipelineConfig& c, const std::string& v) { c.alpha = parse_double("poison.alpha", v); },
            [](const PipelineConfig& c) { return format_double(c.alpha); });
        add("poison.ratio",
            [](PipelineConfig& c, const std::string& v) { c.poison_ratio = parse_double("poison.ratio", v); },
            [](const PipelineConfig& c) { return format_double(c.poison_ratio); });
        add("poison.seed",
            [](PipelineConfig& c, const std::string& v) { c.poison_seed = parse_u64("poison.seed", v); },
            [](const PipelineConfig& c) { return std::to_string(c.poison_seed); });
        add("poison.size_scale",
            [](PipelineConfig& c, const std::string& v) { c.size_scale = parse_double("poison.size_scale", v); },
            [](const PipelineConfig& c) { return format_double(c.size_scale); });
        add("poison.position", [](PipelineConfig& c, const std::string& v) { c.position = v; },
            [](const PipelineConfig& c) { return c.position; });
        add("poison.vqa",
            [](PipelineConfig& c, const std::string& v) { c.emit_vqa = parse_bool("poison.vqa", v); },
            [](const PipelineConfig& c) { return c.emit_vqa ? "true" : "false"; });

        add("fluor.gain",
            [](PipelineConfig& c, const std::string& v) { c.fluor.excitation_gain = parse_double("fluor.gain", v); },
            [](const PipelineConfig& c) { return format_double(c.fluor.excitation_gain); });
        add("fluor.saturation",
            [](PipelineConfig& c, const std::string& v) { c.fluor.saturation = parse_double("fluor.saturation", v); },
            [](const PipelineConfig& c) { return format_double(c.fluor.saturation); });
        add("fluor.ambient_softening",
            [](PipelineConfig& c, const std::string& v) {
                c.fluor.ambient_softening_lux = parse_double("fluor.ambient_softening", v);
            },
            [](const PipelineConfig& c) { return format_double(c.fluor.ambient_softening_lux); });
        add("fluor.powers",
            [](PipelineConfig& c, const std::string& v) { c.powers = parse_double_list("fluor.powers", v); },
            [](const PipelineConfig& c) { return join_doubles(c.powers); });
        add("fluor.ambients",
            [](PipelineConfig& c, const std::string& v) { c.ambients = parse_double_list("fluor.ambients", v); },
            [](const PipelineConfig& c) { return join_doubles(c.ambients); });
        add("fluor.uv_distances",
            [](PipelineConfig& c, const std::string& v) { c.uv_distances = parse_double_list("fluor.uv_distances", v); },
            [](const PipelineConfig& c) { return join_doubles(c.uv_distances); });
        add("fluor.weathers",
            [](PipelineConfig& c, const std::string& v) { c.weathers = split_list(v); },
            [](const PipelineConfig& c) { return join_strings(c.weathers); });
        add("fluor.steps",
            [](PipelineConfig& c, const std::string& v) { c.interp_steps = parse_int("fluor.steps", v); },
            [](const PipelineConfig& c) { return std::to_string(c.interp_steps); });
        add("fluor.render_size",
            [](PipelineConfig& c, const std::string& v) { c.trigger_render_size = parse_int("fluor.render_size", v); },
            [](const PipelineConfig& c) { return std::to_string(c.trigger_render_size); });

        add("env.ambient_lux",
            [](PipelineConfig& c, const std::string& v) { c.env.ambient_lux = parse_double("env.ambient_lux", v); },
            [](const PipelineConfig& c) { return format_double(c.env.ambient_lux); });
        add("env.uv_power",
            [](PipelineConfig& c, const std::string& v) { c.env.uv_power = parse_double("env.uv_power", v); },
            [](const PipelineConfig& c) { return format_double(c.env.uv_power); });
        add("env.uv_distance",
            [](PipelineConfig& c, const std::string& v) { c.env.uv_distance = parse_double("env.uv_distance", v); },
            [](const PipelineConfig& c) { return format_double(c.env.uv_distance); });
        add("env.camera_distance",
            [](PipelineConfig& c, const std::string& v) { c.env.camera_distance = parse_double("env.camera_distance", v); },
            [](const PipelineConfig& c) { return format_double(c.env.camera_distance); });
        add("env.weather",
            [](PipelineConfig& c, const std::string& v) { c.env.weather = parse_weather(v); },
            [](const PipelineConfig& c) { return to_string(c.env.weather); });

        add("train.lambda",
            [](PipelineConfig& c, const std::string& v) { c.train.lambda_mix = parse_double("train.lambda", v); },
            [](const PipelineConfig& c) { return format_double(c.train.lambda_mix); });
        add("train.epochs",
            [](PipelineConfig& c, const std::string& v) { c.train.epochs = parse_int("train.epochs", v); },
            [](const PipelineConfig& c) { return std::to_string(c.train.epochs); });
        add("train.batch",
            [](PipelineConfig& c, const std::string& v) { c.train.batch_size = parse_int("train.batch", v); },
            [](const PipelineConfig& c) { return std::to_string(c.train.batch_size); });
        add("train.lr",
            [](PipelineConfig& c, const std::string& v) { c.train.learning_rate = parse_double("train.lr", v); },
            [](const PipelineConfig& c) { return format_double(c.train.learning_rate); });
        add("train.momentum",
            [](PipelineConfig& c, const std::string& v) { c.train.momentum = parse_double("train.momentum", v); },
            [](const PipelineConfig& c) { return format_double(c.train.momentum); });
        add("train.seed",
            [](PipelineConfig& c, const std::string& v) { c.train.seed = parse_u64("train.seed", v); },
            [](const PipelineConfig& c) { return std::to_string(c.train.seed); });
        add("train.crop",
            [](PipelineConfig& c, const std::string& v) { c.train.crop_size = parse_int("train.crop", v); },
            [](const PipelineConfig& c) { return std::to_string(c.train.crop_size); });

        add("eval.iou_threshold",
            [](PipelineConfig& c, const std::string& v) { c.iou_threshold = parse_double("eval.iou_threshold", v); },
            [](const PipelineConfig& c) { return format_double(c.iou_threshold); });
        add("eval.detections",
            [](PipelineConfig& c, const std::string& v) { c.detections_file = v; },
            [](const PipelineConfig& c) { return c.detections_file; });

        add("sweep.factor",
            [](PipelineConfig& c, const std::string& v) { c.sweep_factor = v; },
            [](const PipelineConfig& c) { return c.sweep_factor; });
        add("sweep.values",
            [](PipelineConfig& c, const std::string& v) { c.sweep_values = split_list(v); },
            [](const PipelineConfig& c) { return join_strings(c.sweep_values); });

        add("defense.jpeg_quality",
            [](PipelineConfig& c, const std::string& v) { c.jpeg_quality = parse_int("defense.jpeg_quality", v); },
            [](const PipelineConfig& c) { return std::to_string(c.jpeg_quality); });
        add("defense.strip_overlays",
            [](PipelineConfig& c, const std::string& v) { c.strip.num_overlays = parse_int("defense.strip_overlays", v); },
            [](const PipelineConfig& c) { return std::to_string(c.strip.num_overlays); });
        add("defense.strip_alpha",
            [](PipelineConfig& c, const std::string& v) { c.strip.overlay_alpha = parse_double("defense.strip_alpha", v); },
            [](const PipelineConfig& c) { return format_double(c.strip.overlay_alpha); });
        add("defense.strip_fpr",
            [](PipelineConfig& c, const std::string& v) {
                c.strip.entropy_threshold_fpr = parse_double("defense.strip_fpr", v);
            },
            [](const PipelineConfig& c) { return format_double(c.strip.entropy_threshold_fpr); });
        add("defense.strip_seed",
            [](PipelineConfig& c, const std::string& v) { c.strip.seed = parse_u64("defense.strip_seed", v); },
            [](const PipelineConfig& c) { return std::to_string(c.strip.seed); });
        return f;
    }();
    return registry;
}

}  // namespace

void PipelineConfig::validate() const {
    gen.validate();
    parse_goal_tag(goal);
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInputError("poison.alpha must be in [0, 1]");
    if (!(poison_ratio > 0.0 && poison_ratio <= 1.0))
        throw InvalidInputError("poison.ratio must be in (0, 1]");
    if (!(size_scale > 0.0 && size_scale <= 1.0))
        throw InvalidInputError("poison.size_scale must be in (0, 1]");
    parse_position_mode(position);
    if (fluor.excitation_gain <= 0.0 || fluor.saturation <= 0.0 ||
        fluor.ambient_softening_lux <= 0.0)
        throw InvalidInputError("fluorescence constants must be positive");
    if (powers.empty() || ambients.empty() || uv_distances.empty() || weathers.empty())
        throw InvalidInputError("trigger condition lists must be non-empty");
    for (const auto& w : weathers) parse_weather(w);
    if (interp_steps < 0) throw InvalidInputError("fluor.steps must be >= 0");
    if (trigger_render_size < 8) throw InvalidInputError("fluor.render_size must be >= 8");
    env.validate();
    train.validate();
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0))
        throw InvalidInputError("eval.iou_threshold must be in (0, 1)");
    parse_sweep_factor(sweep_factor);
    if (sweep_values.empty()) throw InvalidInputError("sweep.values must be non-empty");
    if (jpeg_quality < 1 || jpeg_quality > 100)
        throw InvalidInputError("defense.jpeg_quality must be in [1, 100]");
    strip.validate();
    if (out_dir.empty()) throw InvalidInputError("out_dir must be set");
}

std::vector<EnvironmentCondition> PipelineConfig::trigger_conditions() const {
    std::vector<EnvironmentCondition> conditions;
    for (double power : powers)
        for (double lux : ambients)
            for (double dist : uv_distances)
                for (const auto& weather : weathers) {
                    EnvironmentCondition cond = env;
                    cond.uv_power = power;
                    cond.ambient_lux = lux;
                    cond.uv_distance = dist;
                    cond.weather = parse_weather(weather);
                    conditions.push_back(cond);
                }
    return conditions;
}

std::filesystem::path PipelineConfig::poisoned_dir() const {
    return std::filesystem::path(out_dir) / "poisoned";
}
std::filesystem::path PipelineConfig::model_path() const {
    return std::filesystem::path(out_dir) / "model.ckpt";
}
std::filesystem::path PipelineConfig::baseline_path() const {
    return std::filesystem::path(out_dir) / "baseline.ckpt";
}
std::filesystem::path PipelineConfig::report_json_path() const {
    return std::filesystem::path(out_dir) / "report.json";
}
std::filesystem::path PipelineConfig::report_text_path() const {
    return std::filesystem::path(out_dir) / "report.txt";
}
std::filesystem::path PipelineConfig::logs_dir() const {
    return std::filesystem::path(out_dir) / "logs";
}
std::filesystem::path PipelineConfig::defense_dir() const {
    return std::filesystem::path(out_dir) / "defense";
}

PipelineConfig parse_config_text(const std::string& text) {
    PipelineConfig config;
    std::map<std::string, const Field*> by_key;
    for (const auto& field : fields()) by_key[field.key] = &field;

    std::set<std::string> seen;
    std::istringstream ss(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw InvalidInputError("config line " + std::to_string(lineno) +
                                    ": expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        const auto it = by_key.find(key);
        if (it == by_key.end())
            throw InvalidInputError("unknown config key '" + key + "' (line " +
                                    std::to_string(lineno) + ")");
        if (!seen.insert(key).second)
            throw InvalidInputError("duplicate config key '" + key + "'");
        it->second->set(config, value);
    }
    return config;
}

PipelineConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

void apply_config_override(PipelineConfig& config, const std::string& key,
                           const std::string& value) {
    for (const auto& field : fields()) {
        if (field.key == key) {
            field.set(config, value);
            return;
        }
    }
    throw InvalidInputError("unknown config key '" + key + "'");
}

std::string serialize_config(const PipelineConfig& config) {
    std::string out;
    for (const auto& field : fields()) {
        out += field.key;
        out += " = ";
        out += field.get(config);
        out += "\n";
    }
    return out;
}

std::string config_hash(const PipelineConfig& config) {
    const std::string text = serialize_config(config);
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001B3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace glowsign
