#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "glowsign/image.hpp"

namespace glowsign {

enum class Weather { sunny, cloudy, rainy, foggy };

std::string to_string(Weather w);
Weather parse_weather(const std::string& name);

// Physical context a trigger is rendered for. uv_distance is the lamp-to-sign
// distance, camera_distance the camera-to-sign distance.
struct EnvironmentCondition {
    double ambient_lux = 1000.0;
    double uv_power = 120.0;       // watts
    double uv_distance = 5.0;      // meters
    double camera_distance = 5.0;  // meters
    Weather weather = Weather::cloudy;

    void validate() const;
};

// Appearance-model constants. excitation_gain scales uv_power/uv_distance^2
// into the normalized excitation intensity, which clamps at saturation;
// ambient_softening_lux is the ambient level at which trigger contrast
// halves. Defaults are calibrated so saturation sets in below ~5.5 m at
// 120 W and above ~100 W at 5 m.
struct FluorParams {
    double excitation_gain = 0.25;
    double saturation = 1.0;
    double ambient_softening_lux = 2000.0;
};

enum class Provenance { keyframe, interpolated, parametric };

std::string to_string(Provenance p);

// A rendered heart trigger: square RGBA raster with RGB in [0,255] and
// alpha in [0,1], both kept as doubles until export. Alpha is exactly zero
// outside the heart silhouette.
struct TriggerAsset {
    int side = 0;
    std::vector<double> rgba;  // 4 * side * side, row-major
    EnvironmentCondition condition;
    Provenance provenance = Provenance::parametric;

    double* px(int x, int y) { return rgba.data() + 4 * (static_cast<size_t>(y) * side + x); }
    const double* px(int x, int y) const {
        return rgba.data() + 4 * (static_cast<size_t>(y) * side + x);
    }
};

// One row of the graffiti survey: six 1-3 ratings.
struct GraffitiScore {
    int complexity = 1;
    int commonness = 1;
    int coloration = 1;
    int recognizability = 1;
    int placement = 1;
    int scope = 1;

    int total() const {
        return complexity + commonness + coloration + recognizability + placement + scope;
    }
    void validate() const;
};

// Index of the candidate with the lowest total; ties resolved by lower
// recognizability, then lower placement, then first occurrence.
size_t select_trigger_design(const std::vector<GraffitiScore>& candidates);

// Heart silhouette coverage in [0,1] per pixel for a size x size raster,
// supersampled so edges come out soft. The implicit heart curve is scaled
// to fill the unit square, touching all four edges.
std::vector<double> heart_silhouette(int size);

// Normalized excitation intensity: clamp(gain * power / distance^2, 0, sat).
// Equal beyond saturation regardless of distance or power.
double excitation_intensity(const EnvironmentCondition& cond, const FluorParams& params = {});

// Excitation scaled by ambient washout, in [0,1]; the factor that drives
// rendered alpha and color vividness.
double trigger_visibility(const EnvironmentCondition& cond, const FluorParams& params = {});

// Renders the heart for one condition. uv_power = 0 yields an all-zero
// alpha (the ink is invisible without excitation). Foggy blurs the raster,
// rainy adds streak attenuation; both stay inside the silhouette.
TriggerAsset render_parametric(const EnvironmentCondition& cond, int size,
                               const FluorParams& params = {});

// Per-pixel linear blend; t=0 and t=1 return the endpoints bit-exactly.
// Scalar condition fields interpolate linearly; weather snaps to the
// nearer endpoint (enum-order minimum at t=0.5 so the blend is symmetric).
TriggerAsset interpolate(const TriggerAsset& start, const TriggerAsset& end, double t);

// Renders all conditions as keyframes and inserts `steps` interpolated
// frames between each consecutive pair.
std::vector<TriggerAsset> build_trigger_set(const std::vector<EnvironmentCondition>& conditions,
                                            int steps, int size, const FluorParams& params = {});

// 8-bit RGBA export.
Image trigger_to_image(const TriggerAsset& asset);
void save_trigger_png(const TriggerAsset& asset, const std::filesystem::path& path);

}  // namespace glowsign
