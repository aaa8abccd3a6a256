#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "glowsign/dataset.hpp"
#include "glowsign/error.hpp"

using namespace glowsign;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "glowsign_synth_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<char> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("synthetic generation: counts, schema, and box validity") {
    SyntheticSignSpec spec;
    spec.classes = 3;
    spec.per_class = 4;
    spec.image_size = 64;
    spec.seed = 77;

    const fs::path out = fresh_dir("gen");
    const Dataset ds = generate_synthetic_dataset(spec, out);
    CHECK(ds.images.size() == 12);

    const Dataset loaded = load_dataset(out);
    REQUIRE(loaded.images.size() == 12);
    int labels_seen[3] = {0, 0, 0};
    for (const auto& entry : loaded.images) {
        REQUIRE(entry.boxes.size() == 1);
        const SignBox& box = entry.boxes.front();
        CHECK_NOTHROW(box.validate_within(64, 64));
        for (int c = 0; c < 3; ++c)
            if (box.label == synthetic_class_label(c)) ++labels_seen[c];
        CHECK(fs::exists(out / entry.path));
    }
    CHECK(labels_seen[0] == 4);
    CHECK(labels_seen[1] == 4);
    CHECK(labels_seen[2] == 4);
    CHECK(collect_class_labels(loaded) == std::vector<std::string>{"c00", "c01", "c02"});
}

TEST_CASE("synthetic generation is byte-deterministic per seed") {
    SyntheticSignSpec spec;
    spec.classes = 2;
    spec.per_class = 3;
    spec.image_size = 64;
    spec.seed = 5;

    const fs::path a = fresh_dir("det_a");
    const fs::path b = fresh_dir("det_b");
    const Dataset da = generate_synthetic_dataset(spec, a);
    generate_synthetic_dataset(spec, b);
    CHECK(file_bytes(a / kAnnotationFileName) == file_bytes(b / kAnnotationFileName));
    for (const auto& entry : da.images)
        CHECK(file_bytes(a / entry.path) == file_bytes(b / entry.path));

    // A different seed must change the pixels.
    SyntheticSignSpec other = spec;
    other.seed = 6;
    const fs::path c = fresh_dir("det_c");
    generate_synthetic_dataset(other, c);
    CHECK(file_bytes(a / da.images[0].path) != file_bytes(c / da.images[0].path));
}

TEST_CASE("synthetic spec validation") {
    SyntheticSignSpec spec;
    spec.classes = 0;
    CHECK_THROWS_AS(spec.validate(), InvalidInputError);
    spec = SyntheticSignSpec{};
    spec.shape_mix = {{SignShape::circle, 0.5}};
    CHECK_THROWS_AS(spec.validate(), InvalidInputError);
    spec = SyntheticSignSpec{};
    spec.image_size = 16;
    CHECK_THROWS_AS(spec.validate(), InvalidInputError);
}

TEST_CASE("crop extraction produces normalized CHW tensors") {
    SyntheticSignSpec spec;
    spec.classes = 2;
    spec.per_class = 2;
    spec.image_size = 64;
    spec.seed = 8;
    const fs::path out = fresh_dir("crops");
    const Dataset ds = generate_synthetic_dataset(spec, out);

    const std::vector<Crop> crops = crops_from_dataset(ds, 32);
    REQUIRE(crops.size() == 4);
    for (const auto& crop : crops) {
        CHECK(crop.size == 32);
        CHECK(crop.chw.size() == 3u * 32 * 32);
        for (double v : crop.chw) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("gtsrb-style ingestion converts annotations and images") {
    const fs::path src = fresh_dir("gtsrb_src");
    fs::create_directories(src / "00014");

    // Two PPM images plus the per-class annotation CSV.
    Image img(40, 40, 3);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x) {
            uint8_t* p = img.pixel(x, y);
            p[0] = static_cast<uint8_t>(x * 6);
            p[1] = static_cast<uint8_t>(y * 6);
            p[2] = 128;
        }
    save_ppm(img, src / "00014" / "00000_00000.ppm");
    save_ppm(img, src / "00014" / "00000_00001.ppm");
    {
        std::ofstream csv(src / "00014" / "GT-00014.csv");
        csv << "Filename;Width;Height;Roi.X1;Roi.Y1;Roi.X2;Roi.Y2;ClassId\n";
        csv << "00000_00000.ppm;40;40;5;5;35;35;14\n";
        csv << "00000_00001.ppm;40;40;6;4;38;36;14\n";
    }
    const fs::path shapes = fresh_dir("gtsrb_maps") / "shapes.txt";
    std::ofstream(shapes) << "# stop signs\n14=octagon\n";

    const fs::path out = fresh_dir("gtsrb_out");
    const Dataset ds = ingest_gtsrb(src, out, shapes);
    REQUIRE(ds.images.size() == 2);
    const Dataset loaded = load_dataset(out);
    const SignBox& box = loaded.images[0].boxes.front();
    CHECK(box.u == 5);
    CHECK(box.w == 30);
    CHECK(box.shape == SignShape::octagon);
    CHECK(box.label == "gtsrb_14");
    CHECK(fs::exists(out / loaded.images[0].path));
    CHECK(load_image(out / loaded.images[0].path).width == 40);
}
