#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "glowsign/error.hpp"
#include "glowsign/image.hpp"
#include "glowsign/rng.hpp"

using namespace glowsign;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "glowsign_image_tests";
    fs::create_directories(dir);
    return dir;
}

Image random_image(int w, int h, uint64_t seed) {
    Image img(w, h, 3);
    Rng rng(seed);
    for (auto& b : img.data) b = static_cast<uint8_t>(rng.below(256));
    return img;
}

std::vector<char> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("png round-trip is lossless") {
    const Image img = random_image(37, 23, 1);
    const fs::path p = temp_dir() / "rt.png";
    save_png(img, p);
    const Image back = load_image(p);
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.data == img.data);
}

TEST_CASE("png encoding is byte-deterministic") {
    const Image img = random_image(64, 64, 2);
    const fs::path a = temp_dir() / "det_a.png";
    const fs::path b = temp_dir() / "det_b.png";
    save_png(img, a);
    save_png(img, b);
    CHECK(file_bytes(a) == file_bytes(b));
}

TEST_CASE("ppm round-trip") {
    const Image img = random_image(16, 9, 3);
    const fs::path p = temp_dir() / "rt.ppm";
    save_ppm(img, p);
    CHECK(load_image(p).data == img.data);
}

TEST_CASE("jpeg round-trip at quality 100 is near-lossless on smooth content") {
    Image img(48, 48, 3);
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x) {
            uint8_t* p = img.pixel(x, y);
            p[0] = static_cast<uint8_t>(120 + x);
            p[1] = static_cast<uint8_t>(90 + y);
            p[2] = static_cast<uint8_t>(60 + (x + y) / 2);
        }
    const auto bytes = encode_jpeg(img, 100);
    const Image back = decode_jpeg(bytes.data(), bytes.size());
    CHECK(psnr(img, back) >= 40.0);
    CHECK_THROWS_AS(encode_jpeg(img, 0), InvalidInputError);
    CHECK_THROWS_AS(encode_jpeg(img, 101), InvalidInputError);
}

TEST_CASE("jpeg files load through the magic sniffing path") {
    const Image img = random_image(20, 20, 4);
    const fs::path p = temp_dir() / "rt.jpg";
    save_jpeg(img, p, 90);
    const Image back = load_image(p);
    CHECK(back.width == 20);
    CHECK(back.height == 20);
}

TEST_CASE("unrecognized files raise io errors") {
    const fs::path p = temp_dir() / "garbage.bin";
    std::ofstream(p, std::ios::binary) << "not an image at all";
    CHECK_THROWS_AS(load_image(p), IoError);
    CHECK_THROWS_AS(load_image(temp_dir() / "does_not_exist.png"), IoError);
}

TEST_CASE("same-size resize is the identity") {
    const Image img = random_image(31, 17, 5);
    const Image same = resize_bilinear(img, 31, 17);
    CHECK(same.data == img.data);
    CHECK_THROWS_AS(resize_bilinear(img, 0, 5), InvalidInputError);
}

TEST_CASE("psnr of identical images is infinite") {
    const Image img = random_image(8, 8, 6);
    CHECK(std::isinf(psnr(img, img)));
}
