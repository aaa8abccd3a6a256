#include "glowsign/geometry.hpp"

#include <cmath>

#include "glowsign/error.hpp"

namespace glowsign {

namespace {

// Tolerance for boundary pixels: the maximum square is tangent to the
// triangle's slanted edges, so exact-boundary samples must count as inside.
constexpr double kEdgeEps = 1e-7;

}  // namespace

std::string to_string(SignShape shape) {
    switch (shape) {
    case SignShape::circle: return "circle";
    case SignShape::triangle: return "triangle";
    case SignShape::octagon: return "octagon";
    case SignShape::rectangle: return "rectangle";
    }
    return "circle";
}

SignShape parse_sign_shape(const std::string& name) {
    if (name == "circle") return SignShape::circle;
    if (name == "triangle") return SignShape::triangle;
    if (name == "octagon") return SignShape::octagon;
    if (name == "rectangle") return SignShape::rectangle;
    throw UnsupportedShapeError("unsupported sign shape: '" + name + "'");
}

std::string to_string(PositionMode mode) {
    return mode == PositionMode::upper ? "upper" : "center";
}

PositionMode parse_position_mode(const std::string& name) {
    if (name == "upper") return PositionMode::upper;
    if (name == "center") return PositionMode::center;
    throw InvalidInputError("unknown position mode: '" + name + "'");
}

void SignBox::validate() const {
    if (w <= 0 || h <= 0)
        throw InvalidInputError("degenerate sign box: w=" + std::to_string(w) +
                                " h=" + std::to_string(h));
    if (u < 0 || v < 0)
        throw InvalidInputError("sign box has negative origin: u=" + std::to_string(u) +
                                " v=" + std::to_string(v));
}

void SignBox::validate_within(int image_w, int image_h) const {
    validate();
    if (u + w > image_w || v + h > image_h)
        throw InvalidInputError("sign box exceeds image bounds (" + std::to_string(image_w) +
                                "x" + std::to_string(image_h) + ")");
}

double compute_trigger_side(const SignBox& box) {
    box.validate();
    const double w = box.w;
    const double h = box.h;
    return h * w / (4.0 * h + 2.0 * w);
}

double compute_relative_area(const SignBox& box) {
    box.validate();
    const double w = box.w;
    const double h = box.h;
    const double denom = 4.0 * h + 2.0 * w;
    return h * w / (denom * denom);
}

std::pair<double, double> placement_center(const SignBox& box, PositionMode mode) {
    box.validate();
    const double cx = box.u + box.w / 2.0;
    const double cy = mode == PositionMode::upper ? box.v + box.h / 4.0
                                                  : box.v + box.h / 2.0;
    return {cx, cy};
}

TriggerPlacement plan_placement(const SignBox& box, double size_scale, PositionMode mode) {
    if (!(size_scale > 0.0) || size_scale > 1.0)
        throw InvalidInputError("size_scale must be in (0, 1]");
    const double side = compute_trigger_side(box) * size_scale;
    const auto [cx, cy] = placement_center(box, mode);
    TriggerPlacement p;
    p.side = side;
    p.cx = cx;
    p.cy = cy;
    p.relative_area = side * side / (static_cast<double>(box.w) * box.h);
    return p;
}

PixelRect placement_pixel_rect(const TriggerPlacement& placement) {
    if (!(placement.side > 0.0))
        throw InvalidInputError("placement has non-positive side");
    const double half = placement.side / 2.0;
    PixelRect r;
    r.x0 = static_cast<int>(std::lround(placement.cx - half));
    r.y0 = static_cast<int>(std::lround(placement.cy - half));
    r.w = static_cast<int>(std::lround(placement.cx + half)) - r.x0;
    r.h = static_cast<int>(std::lround(placement.cy + half)) - r.y0;
    return r;
}

bool point_in_shape(const SignBox& box, double x, double y) {
    const double w = box.w;
    const double h = box.h;
    const double dx = x - (box.u + w / 2.0);
    const double dy = y - (box.v + h / 2.0);

    switch (box.shape) {
    case SignShape::rectangle:
        return std::abs(dx) <= w / 2.0 + kEdgeEps && std::abs(dy) <= h / 2.0 + kEdgeEps;
    case SignShape::circle: {
        // Inscribed in the box; an ellipse when the box is not square.
        const double nx = dx / (w / 2.0);
        const double ny = dy / (h / 2.0);
        return nx * nx + ny * ny <= 1.0 + kEdgeEps;
    }
    case SignShape::triangle: {
        // Apex up at the box's top-center, base along the bottom edge.
        const double yy = y - box.v;
        if (yy < -kEdgeEps || yy > h + kEdgeEps) return false;
        const double halfwidth = (w / 2.0) * (yy / h);
        return std::abs(dx) <= halfwidth + kEdgeEps;
    }
    case SignShape::octagon: {
        // Regular octagon inscribed in the box (stop-sign convention),
        // stretched with the box. In normalized coordinates the corner
        // cuts are the lines |nx| + |ny| = sqrt(2).
        const double nx = std::abs(dx) / (w / 2.0);
        const double ny = std::abs(dy) / (h / 2.0);
        if (nx > 1.0 + kEdgeEps || ny > 1.0 + kEdgeEps) return false;
        return nx + ny <= std::sqrt(2.0) + kEdgeEps;
    }
    }
    throw UnsupportedShapeError("unsupported sign shape tag");
}

bool verify_containment(const SignBox& box, const TriggerPlacement& placement) {
    box.validate();
    const PixelRect r = placement_pixel_rect(placement);
    for (int y = r.y0; y < r.y0 + r.h; ++y) {
        for (int x = r.x0; x < r.x0 + r.w; ++x) {
            if (!point_in_shape(box, x + 0.5, y + 0.5)) return false;
        }
    }
    return true;
}

}  // namespace glowsign
