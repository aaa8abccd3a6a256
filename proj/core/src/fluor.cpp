#include "glowsign/fluor.hpp"

#include <algorithm>
#include <cmath>

#include "glowsign/error.hpp"

namespace glowsign {

namespace {

// Implicit heart curve, y axis pointing up; the region f <= 0 is the heart.
double heart_f(double x, double y) {
    const double q = x * x + y * y - 1.0;
    return q * q * q - x * x * y * y * y;
}

struct HeartBounds {
    double xmin, xmax, ymin, ymax;
};

// Tight bounding box of the implicit region, found once by grid scan.
// Mapping that box onto the raster makes the silhouette touch all four
// edges of the unit square.
const HeartBounds& heart_bounds() {
    static const HeartBounds bounds = [] {
        const int n = 4096;
        const double lo = -1.5, hi = 1.5;
        HeartBounds b{hi, lo, hi, lo};
        for (int i = 0; i < n; ++i) {
            const double y = lo + (hi - lo) * (i + 0.5) / n;
            for (int j = 0; j < n; ++j) {
                const double x = lo + (hi - lo) * (j + 0.5) / n;
                if (heart_f(x, y) <= 0.0) {
                    b.xmin = std::min(b.xmin, x);
                    b.xmax = std::max(b.xmax, x);
                    b.ymin = std::min(b.ymin, y);
                    b.ymax = std::max(b.ymax, y);
                }
            }
        }
        return b;
    }();
    return bounds;
}

// Column attenuation pattern for rainy renders; fixed so renders stay a
// pure function of (condition, size).
double streak01(int column) {
    uint64_t z = static_cast<uint64_t>(column) * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

// Separable [1 4 6 4 1]/16 blur over one channel of the RGBA raster.
void blur_channel(std::vector<double>& rgba, int side, int channel) {
    static const double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
    std::vector<double> tmp(static_cast<size_t>(side) * side);
    auto at = [&](int x, int y) -> double& {
        return rgba[4 * (static_cast<size_t>(y) * side + x) + channel];
    };
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            double acc = 0.0;
            for (int i = -2; i <= 2; ++i) {
                const int xx = std::clamp(x + i, 0, side - 1);
                acc += k[i + 2] * at(xx, y);
            }
            tmp[static_cast<size_t>(y) * side + x] = acc;
        }
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            double acc = 0.0;
            for (int i = -2; i <= 2; ++i) {
                const int yy = std::clamp(y + i, 0, side - 1);
                acc += k[i + 2] * tmp[static_cast<size_t>(yy) * side + x];
            }
            at(x, y) = acc;
        }
}

}  // namespace

std::string to_string(Weather w) {
    switch (w) {
    case Weather::sunny: return "sunny";
    case Weather::cloudy: return "cloudy";
    case Weather::rainy: return "rainy";
    case Weather::foggy: return "foggy";
    }
    return "cloudy";
}

Weather parse_weather(const std::string& name) {
    if (name == "sunny") return Weather::sunny;
    if (name == "cloudy") return Weather::cloudy;
    if (name == "rainy") return Weather::rainy;
    if (name == "foggy") return Weather::foggy;
    throw InvalidInputError("unknown weather tag: '" + name + "'");
}

std::string to_string(Provenance p) {
    switch (p) {
    case Provenance::keyframe: return "keyframe";
    case Provenance::interpolated: return "interpolated";
    case Provenance::parametric: return "parametric";
    }
    return "parametric";
}

void EnvironmentCondition::validate() const {
    if (ambient_lux < 0 || uv_power < 0 || uv_distance < 0 || camera_distance < 0)
        throw InvalidInputError("environment condition scalars must be non-negative");
}

void GraffitiScore::validate() const {
    for (int v : {complexity, commonness, coloration, recognizability, placement, scope}) {
        if (v < 1 || v > 3)
            throw InvalidInputError("graffiti score components must be in {1, 2, 3}");
    }
}

size_t select_trigger_design(const std::vector<GraffitiScore>& candidates) {
    if (candidates.empty())
        throw InvalidInputError("select_trigger_design requires at least one candidate");
    size_t best = 0;
    candidates[0].validate();
    for (size_t i = 1; i < candidates.size(); ++i) {
        candidates[i].validate();
        const auto& c = candidates[i];
        const auto& b = candidates[best];
        const auto key = [](const GraffitiScore& g) {
            return std::tuple<int, int, int>(g.total(), g.recognizability, g.placement);
        };
        if (key(c) < key(b)) best = i;
    }
    return best;
}

std::vector<double> heart_silhouette(int size) {
    if (size < 8)
        throw InvalidInputError("trigger raster size must be at least 8 pixels");
    const HeartBounds& b = heart_bounds();
    const int ss = 4;  // supersampling grid per axis
    std::vector<double> coverage(static_cast<size_t>(size) * size, 0.0);
    for (int py = 0; py < size; ++py) {
        for (int px = 0; px < size; ++px) {
            int hits = 0;
            for (int sy = 0; sy < ss; ++sy) {
                for (int sx = 0; sx < ss; ++sx) {
                    const double fx = (px + (sx + 0.5) / ss) / size;
                    const double fy = (py + (sy + 0.5) / ss) / size;
                    const double hx = b.xmin + fx * (b.xmax - b.xmin);
                    // Image rows grow downward; the heart's point is at ymin.
                    const double hy = b.ymax - fy * (b.ymax - b.ymin);
                    if (heart_f(hx, hy) <= 0.0) ++hits;
                }
            }
            coverage[static_cast<size_t>(py) * size + px] =
                static_cast<double>(hits) / (ss * ss);
        }
    }
    return coverage;
}

double excitation_intensity(const EnvironmentCondition& cond, const FluorParams& params) {
    cond.validate();
    if (cond.uv_power <= 0.0) return 0.0;
    if (cond.uv_distance <= 0.0) return params.saturation;
    const double raw = params.excitation_gain * cond.uv_power /
                       (cond.uv_distance * cond.uv_distance);
    return std::clamp(raw, 0.0, params.saturation);
}

double trigger_visibility(const EnvironmentCondition& cond, const FluorParams& params) {
    const double excitation = excitation_intensity(cond, params) / params.saturation;
    const double ambient = 1.0 / (1.0 + cond.ambient_lux / params.ambient_softening_lux);
    return excitation * ambient;
}

TriggerAsset render_parametric(const EnvironmentCondition& cond, int size,
                               const FluorParams& params) {
    const std::vector<double> coverage = heart_silhouette(size);

    const double vis = trigger_visibility(cond, params);
    // Fluorescent red: dull when barely excited, vivid pink-red when driven
    // into saturation.
    const double r = 170.0 + 85.0 * vis;
    const double g = 20.0 + 40.0 * vis;
    const double b = 60.0 + 50.0 * vis;

    TriggerAsset asset;
    asset.side = size;
    asset.condition = cond;
    asset.provenance = Provenance::parametric;
    asset.rgba.resize(static_cast<size_t>(size) * size * 4);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double* p = asset.px(x, y);
            const double c = coverage[static_cast<size_t>(y) * size + x];
            p[0] = r;
            p[1] = g;
            p[2] = b;
            p[3] = c * vis;
        }
    }

    if (cond.weather == Weather::foggy) {
        for (int ch = 0; ch < 4; ++ch) blur_channel(asset.rgba, size, ch);
    } else if (cond.weather == Weather::rainy) {
        for (int x = 0; x < size; ++x) {
            const double fade = 1.0 - 0.3 * streak01(x);
            for (int y = 0; y < size; ++y) asset.px(x, y)[3] *= fade;
        }
    }
    // Weather effects must not leak opacity outside the silhouette.
    if (cond.weather == Weather::foggy) {
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                if (coverage[static_cast<size_t>(y) * size + x] == 0.0)
                    asset.px(x, y)[3] = 0.0;
    }
    return asset;
}

TriggerAsset interpolate(const TriggerAsset& start, const TriggerAsset& end, double t) {
    if (start.side != end.side)
        throw InvalidInputError("interpolate: raster dimensions differ");
    if (!(t >= 0.0 && t <= 1.0))
        throw InvalidInputError("interpolate: t must be in [0, 1]");
    if (t == 0.0) return start;
    if (t == 1.0) return end;

    TriggerAsset out;
    out.side = start.side;
    out.provenance = Provenance::interpolated;
    out.rgba.resize(start.rgba.size());
    const double u = 1.0 - t;
    for (size_t i = 0; i < out.rgba.size(); ++i)
        out.rgba[i] = u * start.rgba[i] + t * end.rgba[i];

    const auto& a = start.condition;
    const auto& b = end.condition;
    out.condition.ambient_lux = u * a.ambient_lux + t * b.ambient_lux;
    out.condition.uv_power = u * a.uv_power + t * b.uv_power;
    out.condition.uv_distance = u * a.uv_distance + t * b.uv_distance;
    out.condition.camera_distance = u * a.camera_distance + t * b.camera_distance;
    if (t < 0.5)
        out.condition.weather = a.weather;
    else if (t > 0.5)
        out.condition.weather = b.weather;
    else
        out.condition.weather = std::min(a.weather, b.weather);
    return out;
}

std::vector<TriggerAsset> build_trigger_set(const std::vector<EnvironmentCondition>& conditions,
                                            int steps, int size, const FluorParams& params) {
    if (conditions.empty())
        throw InvalidInputError("build_trigger_set requires at least one condition");
    if (steps < 0) throw InvalidInputError("build_trigger_set: steps must be >= 0");
    if (steps > 0 && conditions.size() < 2)
        throw InvalidInputError("build_trigger_set: interpolation needs at least two conditions");

    std::vector<TriggerAsset> keyframes;
    keyframes.reserve(conditions.size());
    for (const auto& cond : conditions) {
        TriggerAsset kf = render_parametric(cond, size, params);
        kf.provenance = Provenance::keyframe;
        keyframes.push_back(std::move(kf));
    }

    std::vector<TriggerAsset> out;
    out.reserve(keyframes.size() + static_cast<size_t>(steps) * (keyframes.size() - 1));
    for (size_t i = 0; i < keyframes.size(); ++i) {
        out.push_back(keyframes[i]);
        if (i + 1 < keyframes.size()) {
            for (int j = 1; j <= steps; ++j) {
                const double t = static_cast<double>(j) / (steps + 1);
                out.push_back(interpolate(keyframes[i], keyframes[i + 1], t));
            }
        }
    }
    return out;
}

Image trigger_to_image(const TriggerAsset& asset) {
    Image img(asset.side, asset.side, 4);
    for (int y = 0; y < asset.side; ++y) {
        for (int x = 0; x < asset.side; ++x) {
            const double* p = asset.px(x, y);
            uint8_t* q = img.pixel(x, y);
            for (int c = 0; c < 3; ++c)
                q[c] = static_cast<uint8_t>(std::lround(std::clamp(p[c], 0.0, 255.0)));
            q[3] = static_cast<uint8_t>(std::lround(std::clamp(p[3], 0.0, 1.0) * 255.0));
        }
    }
    return img;
}

void save_trigger_png(const TriggerAsset& asset, const std::filesystem::path& path) {
    save_png(trigger_to_image(asset), path);
}

}  // namespace glowsign
