#include "glowsign/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "glowsign/error.hpp"

namespace glowsign {

namespace fs = std::filesystem;

Dataset load_dataset(const fs::path& root) {
    const fs::path file = root / kAnnotationFileName;
    std::ifstream in(file);
    if (!in) throw IoError("cannot open annotation file '" + file.string() + "'");

    std::map<std::string, std::vector<SignBox>> grouped;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string path, shape_name, label;
        SignBox box;
        std::string u, v, w, h;
        if (!std::getline(ss, path, '\t') || !std::getline(ss, u, '\t') ||
            !std::getline(ss, v, '\t') || !std::getline(ss, w, '\t') ||
            !std::getline(ss, h, '\t') || !std::getline(ss, shape_name, '\t') ||
            !std::getline(ss, label))
            throw InvalidInputError("malformed annotation at " + file.string() + ":" +
                                    std::to_string(lineno));
        try {
            box.u = std::stoi(u);
            box.v = std::stoi(v);
            box.w = std::stoi(w);
            box.h = std::stoi(h);
        } catch (const std::exception&) {
            throw InvalidInputError("non-numeric box at " + file.string() + ":" +
                                    std::to_string(lineno));
        }
        box.shape = parse_sign_shape(shape_name);
        box.label = label;
        box.validate();
        grouped[path].push_back(box);
    }

    Dataset ds;
    ds.root = root;
    ds.images.reserve(grouped.size());
    for (auto& [path, boxes] : grouped) ds.images.push_back({path, std::move(boxes)});
    return ds;
}

void save_annotations(const Dataset& dataset) {
    const fs::path file = dataset.root / kAnnotationFileName;
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write '" + file.string() + "'");
    for (const auto& entry : dataset.images) {
        for (const auto& box : entry.boxes) {
            out << entry.path << '\t' << box.u << '\t' << box.v << '\t' << box.w << '\t'
                << box.h << '\t' << to_string(box.shape) << '\t' << box.label << '\n';
        }
    }
    if (!out) throw IoError("failed writing '" + file.string() + "'");
}

std::vector<std::string> collect_class_labels(const Dataset& dataset) {
    std::set<std::string> labels;
    for (const auto& entry : dataset.images)
        for (const auto& box : entry.boxes)
            if (box.label != kNoneLabel) labels.insert(box.label);
    return {labels.begin(), labels.end()};
}

std::string image_id(const std::string& path) {
    return fs::path(path).stem().string();
}

std::vector<double> extract_crop_chw(const Image& image, const SignBox& box, int size) {
    box.validate_within(image.width, image.height);
    if (size <= 0) throw InvalidInputError("crop size must be positive");
    Image region(box.w, box.h, image.channels);
    for (int y = 0; y < box.h; ++y) {
        const uint8_t* src = image.pixel(box.u, box.v + y);
        std::copy(src, src + static_cast<size_t>(box.w) * image.channels,
                  region.pixel(0, y));
    }
    const Image resized = resize_bilinear(region, size, size);
    std::vector<double> chw(static_cast<size_t>(3) * size * size);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                chw[(static_cast<size_t>(c) * size + y) * size + x] =
                    resized.pixel(x, y)[c] / 255.0;
    return chw;
}

Crop extract_crop(const Image& image, const SignBox& box, const std::string& id, int size) {
    Crop crop;
    crop.image_id = id;
    crop.label = box.label;
    crop.shape = box.shape;
    crop.size = size;
    crop.chw = extract_crop_chw(image, box, size);
    return crop;
}

std::vector<Crop> crops_from_dataset(const Dataset& dataset, int size) {
    std::vector<Crop> crops;
    for (const auto& entry : dataset.images) {
        const Image image = load_image(dataset.image_file(entry));
        for (const auto& box : entry.boxes)
            crops.push_back(extract_crop(image, box, image_id(entry.path), size));
    }
    return crops;
}

}  // namespace glowsign
