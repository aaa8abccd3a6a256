#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "glowsign/defense.hpp"
#include "glowsign/error.hpp"
#include "glowsign/rng.hpp"

using namespace glowsign;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "glowsign_defense_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<char> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<Crop> fake_crops(int n_per_class, int classes, int size, uint64_t seed) {
    Rng rng(seed);
    std::vector<Crop> crops;
    for (int c = 0; c < classes; ++c) {
        for (int i = 0; i < n_per_class; ++i) {
            Crop crop;
            crop.image_id = "fake";
            crop.label = "k" + std::to_string(c);
            crop.shape = SignShape::rectangle;
            crop.size = size;
            crop.chw.resize(static_cast<size_t>(3) * size * size);
            const double base = 0.15 + 0.7 * c / std::max(1, classes - 1);
            for (auto& x : crop.chw) x = base + 0.08 * (rng.uniform() - 0.5);
            crops.push_back(std::move(crop));
        }
    }
    return crops;
}

// One trained fixture shared by the STRIP tests.
const ConvNet& fixture_net() {
    static const ConvNet net = [] {
        TrainingConfig config;
        config.lambda_mix = 1.0;
        config.epochs = 3;
        config.crop_size = 16;
        config.learning_rate = 0.05;
        config.seed = 4;
        return train(fake_crops(40, 2, 16, 21), {}, {"k0", "k1"}, config);
    }();
    return net;
}

}  // namespace

TEST_CASE("jpeg defense keeps annotations byte-identical") {
    const fs::path src = fresh_dir("jpeg_src");
    SyntheticSignSpec spec;
    spec.classes = 2;
    spec.per_class = 3;
    spec.image_size = 64;
    spec.seed = 9;
    const Dataset ds = generate_synthetic_dataset(spec, src);

    const fs::path out = fresh_dir("jpeg_out");
    const Dataset compressed = jpeg_defense(ds, out, 75);
    CHECK(compressed.images.size() == ds.images.size());
    CHECK(file_bytes(src / kAnnotationFileName) == file_bytes(out / kAnnotationFileName));

    // Deterministic re-run.
    const fs::path out2 = fresh_dir("jpeg_out2");
    jpeg_defense(ds, out2, 75);
    CHECK(file_bytes(out / ds.images[0].path) == file_bytes(out2 / ds.images[0].path));

    // Quality 100 keeps images close to the originals.
    const fs::path hi = fresh_dir("jpeg_hi");
    jpeg_defense(ds, hi, 100);
    const Image orig = load_image(src / ds.images[0].path);
    const Image comp = load_image(hi / ds.images[0].path);
    CHECK(psnr(orig, comp) >= 40.0);

    CHECK_THROWS_AS(jpeg_defense(ds, out, 0), InvalidInputError);
    CHECK_THROWS_AS(jpeg_defense(ds, out, 101), InvalidInputError);
}

TEST_CASE("shannon entropy reference values") {
    CHECK(shannon_entropy({1.0, 0.0}) == doctest::Approx(0.0));
    CHECK(shannon_entropy({0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(shannon_entropy({0.25, 0.25, 0.25, 0.25}) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
    // Mean of H((1,0)) and H((.5,.5)) is ln2 / 2, the mixed-case reference.
    const double mean = (shannon_entropy({1.0, 0.0}) + shannon_entropy({0.5, 0.5})) / 2.0;
    CHECK(mean == doctest::Approx(std::log(2.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("strip entropy averages over the overlay set, order-independently") {
    const ConvNet& net = fixture_net();
    const std::vector<Crop> crops = fake_crops(10, 2, 16, 22);
    std::vector<Crop> overlays(crops.begin() + 2, crops.begin() + 8);

    StripConfig config;
    config.num_overlays = static_cast<int>(overlays.size());
    const double h1 = strip_entropy(crops[0], overlays, net, config);

    std::vector<Crop> shuffled = overlays;
    std::reverse(shuffled.begin(), shuffled.end());
    const double h2 = strip_entropy(crops[0], shuffled, net, config);
    CHECK(h1 == doctest::Approx(h2).epsilon(1e-12));
    CHECK(h1 >= 0.0);

    CHECK_THROWS_AS(strip_entropy(crops[0], {}, net, config), InvalidInputError);
}

TEST_CASE("strip evaluation: threshold, flag rates, monotonicity") {
    const ConvNet& net = fixture_net();
    const std::vector<Crop> calib = fake_crops(30, 2, 16, 23);   // 60 crops
    const std::vector<Crop> probe = fake_crops(20, 2, 16, 24);   // disjoint split
    // "Poisoned" inputs for the mechanics test: class-1 lookalikes labeled
    // with the attack target so raw ASR is high.
    std::vector<Crop> poisoned = fake_crops(15, 2, 16, 25);
    const AttackGoal goal = AttackGoal::misrecognition("k1");

    StripConfig config;
    config.num_overlays = 8;
    config.entropy_threshold_fpr = 0.05;

    const StripResult r = strip_evaluate(poisoned, calib, probe, net, config, goal);
    CHECK(r.residual_asr <= r.raw_asr);
    CHECK(r.clean_flag_rate >= 0.0);
    CHECK(r.clean_flag_rate <= 1.0);
    CHECK(r.detection_rate >= 0.0);

    // Residual ASR is monotone non-increasing as the FPR budget grows.
    double prev = 1.0;
    for (double fpr : {0.02, 0.10, 0.30}) {
        StripConfig c = config;
        c.entropy_threshold_fpr = fpr;
        const StripResult s = strip_evaluate(poisoned, calib, probe, net, c, goal);
        CHECK(s.residual_asr <= prev + 1e-12);
        prev = s.residual_asr;
    }

    // Determinism.
    const StripResult again = strip_evaluate(poisoned, calib, probe, net, config, goal);
    CHECK(again.residual_asr == r.residual_asr);
    CHECK(again.threshold == r.threshold);

    const std::vector<Crop> tiny(calib.begin(), calib.begin() + 10);
    CHECK_THROWS_AS(strip_evaluate(poisoned, tiny, probe, net, config, goal),
                    InvalidInputError);
}

TEST_CASE("strip config validation") {
    StripConfig c;
    c.num_overlays = 0;
    CHECK_THROWS_AS(c.validate(), InvalidInputError);
    c.num_overlays = 4;
    c.overlay_alpha = 1.0;
    CHECK_THROWS_AS(c.validate(), InvalidInputError);
    c.overlay_alpha = 0.5;
    c.entropy_threshold_fpr = 0.0;
    CHECK_THROWS_AS(c.validate(), InvalidInputError);
}
