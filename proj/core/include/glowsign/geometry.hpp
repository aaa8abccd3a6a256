#pragma once

#include <string>
#include <utility>

namespace glowsign {

enum class SignShape { circle, triangle, octagon, rectangle };

std::string to_string(SignShape shape);
SignShape parse_sign_shape(const std::string& name);

// Axis-aligned bounding box of one localized sign. Coordinates are pixels
// in the parent image; (u, v) is the top-left corner.
struct SignBox {
    int u = 0;
    int v = 0;
    int w = 0;
    int h = 0;
    SignShape shape = SignShape::circle;
    std::string label;

    // Throws InvalidInputError when w/h are non-positive or u/v negative.
    void validate() const;
    // Additionally checks the box against the parent image bounds.
    void validate_within(int image_w, int image_h) const;
};

// Where the trigger square goes: "upper" is the default placement in the
// top half of the sign; "center" exists for the position ablation.
enum class PositionMode { upper, center };

std::string to_string(PositionMode mode);
PositionMode parse_position_mode(const std::string& name);

// A planned trigger square: real-valued side, center, and area fraction.
// Values stay real; rounding to the pixel grid happens only in
// placement_pixel_rect.
struct TriggerPlacement {
    double side = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    double relative_area = 0.0;
};

// Integer pixel rectangle [x0, x0+w) x [y0, y0+h).
struct PixelRect {
    int x0 = 0;
    int y0 = 0;
    int w = 0;
    int h = 0;
    bool empty() const { return w <= 0 || h <= 0; }
};

// Largest square side that stays inside every supported sign shape when
// placed in the upper region: s = h*w / (4h + 2w). The bound comes from the
// triangle, the tightest of the four shapes: with the square's center at
// (u + w/2, v + h/4) and half-side b = s/2, the slanted edge allows a
// horizontal clearance of a = w/8 at the square's top, and solving the
// similar-triangle relation for tangency gives s = 2b as above.
double compute_trigger_side(const SignBox& box);

// Area of that square relative to the box: gamma = h*w / (4h + 2w)^2.
double compute_relative_area(const SignBox& box);

// Trigger center in image coordinates: (u + w/2, v + h/4) for "upper",
// the box center for "center".
std::pair<double, double> placement_center(const SignBox& box,
                                           PositionMode mode = PositionMode::upper);

// Full placement for a box, optionally scaled down from the maximum side.
TriggerPlacement plan_placement(const SignBox& box, double size_scale = 1.0,
                                PositionMode mode = PositionMode::upper);

// Rounds a placement onto the pixel grid by rounding the square's corners
// to the nearest integer. Every covered pixel center then lies within the
// real-valued square, which is what the containment bound is proved for;
// rounding the side instead can inflate the square past the triangle's
// tangent edges. Shared by compositing and containment checks so both
// always agree on the touched pixels.
PixelRect placement_pixel_rect(const TriggerPlacement& placement);

// Closed point-in-polygon test for a sign shape inscribed in its box:
// circle/ellipse inscribed in the box, equilateral-profile triangle with
// apex up, regular octagon inscribed in the box, or the box itself.
bool point_in_shape(const SignBox& box, double x, double y);

// True iff every pixel center of the placement's pixel rect lies inside
// the sign polygon. This is the rasterized check that backs the sizing
// formula; discrepancies surface here rather than silently.
bool verify_containment(const SignBox& box, const TriggerPlacement& placement);

}  // namespace glowsign
