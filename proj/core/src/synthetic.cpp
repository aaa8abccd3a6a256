#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "glowsign/dataset.hpp"
#include "glowsign/error.hpp"
#include "glowsign/rng.hpp"

namespace glowsign {

namespace fs = std::filesystem;

namespace {

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
    h = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0) / 60.0;
    const int i = static_cast<int>(h);
    const double f = h - i;
    const double p = v * (1 - s);
    const double q = v * (1 - s * f);
    const double t = v * (1 - s * (1 - f));
    switch (i % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
    }
}

// Fraction of 2x2 subsamples of a pixel that land inside the shape.
double shape_coverage(const SignBox& box, int px, int py) {
    int hits = 0;
    for (int sy = 0; sy < 2; ++sy)
        for (int sx = 0; sx < 2; ++sx)
            if (point_in_shape(box, px + 0.25 + 0.5 * sx, py + 0.25 + 0.5 * sy)) ++hits;
    return hits / 4.0;
}

SignShape pick_shape(const SyntheticSignSpec& spec, Rng& rng) {
    const double r = rng.uniform();
    double acc = 0.0;
    for (const auto& [shape, weight] : spec.shape_mix) {
        acc += weight;
        if (r < acc) return shape;
    }
    return spec.shape_mix.back().first;
}

}  // namespace

void SyntheticSignSpec::validate() const {
    if (classes <= 0 || per_class <= 0) throw InvalidInputError("synthetic counts must be positive");
    if (classes > 99) throw InvalidInputError("synthetic generator supports at most 99 classes");
    if (image_size < 48) throw InvalidInputError("synthetic image size must be at least 48");
    if (shape_mix.empty()) throw InvalidInputError("shape mix must be non-empty");
    double sum = 0.0;
    for (const auto& [shape, weight] : shape_mix) {
        if (weight < 0.0) throw InvalidInputError("shape mix weights must be non-negative");
        sum += weight;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidInputError("shape mix weights must sum to 1");
}

std::string synthetic_class_label(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "c%02d", index);
    return buf;
}

Dataset generate_synthetic_dataset(const SyntheticSignSpec& spec, const fs::path& out_root) {
    spec.validate();
    std::error_code ec;
    fs::create_directories(out_root / "images", ec);
    if (ec) throw IoError("cannot create output directory '" + out_root.string() + "'");

    Dataset ds;
    ds.root = out_root;

    const int n = spec.image_size;
    for (int cls = 0; cls < spec.classes; ++cls) {
        const std::string label = synthetic_class_label(cls);
        // Per-class visual identity: a hue plus a bar glyph.
        const double hue = 360.0 * cls / spec.classes;
        const auto accent = hsv_to_rgb(hue, 0.85, 0.75);
        const int bars = cls % 3 + 1;
        const bool vertical = (cls / 3) % 2 == 1;

        for (int i = 0; i < spec.per_class; ++i) {
            const int index = cls * spec.per_class + i;
            Rng rng(Rng::mix(spec.seed, static_cast<uint64_t>(index) + 1));

            // Smooth two-corner gradient background with mild pixel noise.
            const double base = rng.uniform(60.0, 150.0);
            const double gx = rng.uniform(-40.0, 40.0);
            const double gy = rng.uniform(-40.0, 40.0);
            std::array<double, 3> tint = {rng.uniform(0.8, 1.2), rng.uniform(0.8, 1.2),
                                          rng.uniform(0.8, 1.2)};
            Image img(n, n, 3);
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x) {
                    const double shade =
                        base + gx * (static_cast<double>(x) / n - 0.5) +
                        gy * (static_cast<double>(y) / n - 0.5) + rng.uniform(-6.0, 6.0);
                    uint8_t* p = img.pixel(x, y);
                    for (int c = 0; c < 3; ++c)
                        p[c] = static_cast<uint8_t>(
                            std::lround(std::clamp(shade * tint[c], 0.0, 255.0)));
                }

            SignBox box;
            box.shape = pick_shape(spec, rng);
            box.label = label;
            box.w = static_cast<int>(std::lround(rng.uniform(0.45, 0.70) * n));
            box.h = std::clamp(static_cast<int>(std::lround(box.w * rng.uniform(0.9, 1.1))),
                               8, n - 4);
            box.w = std::min(box.w, n - 4);
            box.u = 2 + static_cast<int>(rng.below(static_cast<uint64_t>(n - box.w - 3)));
            box.v = 2 + static_cast<int>(rng.below(static_cast<uint64_t>(n - box.h - 3)));
            box.validate_within(n, n);

            const double brightness = rng.uniform(0.85, 1.1);
            const double plate = 243.0 * brightness;
            const int border_px = std::max(2, box.w / 12);
            SignBox inner = box;
            inner.u += border_px;
            inner.v += border_px;
            inner.w -= 2 * border_px;
            inner.h -= 2 * border_px;

            for (int y = box.v; y < box.v + box.h; ++y) {
                for (int x = box.u; x < box.u + box.w; ++x) {
                    const double cov = shape_coverage(box, x, y);
                    if (cov == 0.0) continue;
                    const double inner_cov =
                        inner.w > 0 && inner.h > 0 ? shape_coverage(inner, x, y) : 0.0;

                    // Plate with accent border, glyph in the inner area.
                    std::array<double, 3> color = {plate, plate, plate};
                    if (inner_cov < 1.0) {
                        for (int c = 0; c < 3; ++c)
                            color[c] = inner_cov * plate +
                                       (1 - inner_cov) * accent[c] * 255.0 * brightness;
                    } else {
                        const double nx = (x + 0.5 - (box.u + box.w / 2.0)) / (box.w / 2.0);
                        const double ny = (y + 0.5 - (box.v + box.h / 2.0)) / (box.h / 2.0);
                        const double g = vertical ? nx : ny;
                        if (std::abs(nx) < 0.42 && std::abs(ny) < 0.42) {
                            const int stripe =
                                static_cast<int>(std::floor((g + 0.42) / (0.84 / (2 * bars))));
                            if (stripe % 2 == 1)
                                for (int c = 0; c < 3; ++c)
                                    color[c] = accent[c] * 255.0 * brightness;
                        }
                    }

                    uint8_t* p = img.pixel(x, y);
                    for (int c = 0; c < 3; ++c)
                        p[c] = static_cast<uint8_t>(std::lround(
                            std::clamp(cov * color[c] + (1 - cov) * p[c], 0.0, 255.0)));
                }
            }

            char name[32];
            std::snprintf(name, sizeof(name), "images/img_%05d.png", index);
            save_png(img, out_root / name);
            ds.images.push_back({name, {box}});
        }
    }

    std::sort(ds.images.begin(), ds.images.end(),
              [](const AnnotatedImage& a, const AnnotatedImage& b) { return a.path < b.path; });
    save_annotations(ds);
    return ds;
}

Dataset ingest_gtsrb(const fs::path& src_root, const fs::path& out_root,
                     const fs::path& shape_map_file) {
    std::map<int, SignShape> shape_map;
    if (!shape_map_file.empty()) {
        std::ifstream in(shape_map_file);
        if (!in) throw IoError("cannot open shape map '" + shape_map_file.string() + "'");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw InvalidInputError("malformed shape map line: '" + line + "'");
            shape_map[std::stoi(line.substr(0, eq))] = parse_sign_shape(line.substr(eq + 1));
        }
    }

    std::error_code ec;
    fs::create_directories(out_root / "images", ec);
    if (ec) throw IoError("cannot create output directory '" + out_root.string() + "'");

    std::vector<fs::path> csvs;
    for (const auto& entry : fs::recursive_directory_iterator(src_root))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            csvs.push_back(entry.path());
    std::sort(csvs.begin(), csvs.end());
    if (csvs.empty()) throw InvalidInputError("no annotation CSVs under '" + src_root.string() + "'");

    Dataset ds;
    ds.root = out_root;
    for (const auto& csv : csvs) {
        std::ifstream in(csv);
        std::string line;
        bool header = true;
        while (std::getline(in, line)) {
            if (header) {  // first line is the column header
                header = false;
                continue;
            }
            if (line.empty()) continue;
            std::istringstream ss(line);
            std::string field;
            std::vector<std::string> fields;
            while (std::getline(ss, field, ';')) fields.push_back(field);
            if (fields.size() < 8)
                throw InvalidInputError("malformed GTSRB row in '" + csv.string() + "'");
            const int x1 = std::stoi(fields[3]);
            const int y1 = std::stoi(fields[4]);
            const int x2 = std::stoi(fields[5]);
            const int y2 = std::stoi(fields[6]);
            const int class_id = std::stoi(fields[7]);

            const fs::path src_img = csv.parent_path() / fields[0];
            const Image img = load_image(src_img);
            std::string out_name =
                "images/" + fs::path(fields[0]).stem().string() + ".png";
            save_png(img, out_root / out_name);

            SignBox box;
            box.u = x1;
            box.v = y1;
            box.w = x2 - x1;
            box.h = y2 - y1;
            const auto it = shape_map.find(class_id);
            box.shape = it != shape_map.end() ? it->second : SignShape::circle;
            box.label = "gtsrb_" + std::to_string(class_id);
            box.validate_within(img.width, img.height);
            ds.images.push_back({out_name, {box}});
        }
    }
    std::sort(ds.images.begin(), ds.images.end(),
              [](const AnnotatedImage& a, const AnnotatedImage& b) { return a.path < b.path; });
    save_annotations(ds);
    return ds;
}

}  // namespace glowsign
