#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "glowsign/geometry.hpp"
#include "glowsign/image.hpp"

namespace glowsign {

// Reserved label for suppressed detections; dataset classes must not use it.
inline constexpr const char* kNoneLabel = "NONE";

// One annotated image: path relative to the dataset root plus its sign boxes.
struct AnnotatedImage {
    std::string path;
    std::vector<SignBox> boxes;
};

struct Dataset {
    std::filesystem::path root;
    std::vector<AnnotatedImage> images;  // sorted by path

    std::filesystem::path image_file(const AnnotatedImage& entry) const {
        return root / entry.path;
    }
};

// Annotation file: one sign per line, tab-separated columns
//   image_path  u  v  w  h  shape  label
// with image_path relative to the dataset root.
inline constexpr const char* kAnnotationFileName = "annotations.tsv";

Dataset load_dataset(const std::filesystem::path& root);
void save_annotations(const Dataset& dataset);

// Distinct sign labels, sorted; excludes the reserved NONE label.
std::vector<std::string> collect_class_labels(const Dataset& dataset);

// Stem of the image path, used as the stable sample identifier.
std::string image_id(const std::string& path);

// A model-ready sign crop: box region resized to size x size, CHW planar,
// values in [0, 1].
struct Crop {
    std::string image_id;
    std::string label;
    SignShape shape = SignShape::circle;
    int size = 0;
    std::vector<double> chw;
};

std::vector<double> extract_crop_chw(const Image& image, const SignBox& box, int size);
Crop extract_crop(const Image& image, const SignBox& box, const std::string& id, int size);
std::vector<Crop> crops_from_dataset(const Dataset& dataset, int size);

// Hermetic stand-in for a real sign dataset: procedurally drawn signs on
// textured backgrounds, one sign per image, deterministic per seed.
struct SyntheticSignSpec {
    int classes = 10;
    int per_class = 50;
    int image_size = 96;
    uint64_t seed = 7;
    std::vector<std::pair<SignShape, double>> shape_mix = {
        {SignShape::circle, 0.25},
        {SignShape::triangle, 0.25},
        {SignShape::octagon, 0.25},
        {SignShape::rectangle, 0.25},
    };

    void validate() const;
};

// Class label for index i, "c00".."cNN".
std::string synthetic_class_label(int index);

// Writes images/ plus the annotation file under out_root and returns the
// in-memory dataset.
Dataset generate_synthetic_dataset(const SyntheticSignSpec& spec,
                                   const std::filesystem::path& out_root);

// GTSRB-style ingestion: converts semicolon-separated annotation CSVs
// (Filename;Width;Height;Roi.X1;Roi.Y1;Roi.X2;Roi.Y2;ClassId) found under
// src_root into this schema, re-encoding images as PNG. Shapes come from a
// class-id -> shape mapping file ("<classid>=<shape>" lines); unmapped
// classes default to circle.
Dataset ingest_gtsrb(const std::filesystem::path& src_root,
                     const std::filesystem::path& out_root,
                     const std::filesystem::path& shape_map_file);

}  // namespace glowsign
