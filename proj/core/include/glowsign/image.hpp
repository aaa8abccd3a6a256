#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace glowsign {

// Interleaved 8-bit raster, 3 (RGB) or 4 (RGBA) channels.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<uint8_t> data;

    Image() = default;
    Image(int w, int h, int c, uint8_t fill = 0)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {}

    uint8_t* pixel(int x, int y) {
        return data.data() + (static_cast<size_t>(y) * width + x) * channels;
    }
    const uint8_t* pixel(int x, int y) const {
        return data.data() + (static_cast<size_t>(y) * width + x) * channels;
    }
    bool empty() const { return data.empty(); }
};

// Loads PNG, JPEG, or binary PPM, dispatching on the file's magic bytes.
// Always returns a 3-channel image (alpha is dropped on load).
Image load_image(const std::filesystem::path& path);

void save_png(const Image& img, const std::filesystem::path& path);
void save_ppm(const Image& img, const std::filesystem::path& path);

// Baseline JPEG round-trip, used by the compression defense.
std::vector<uint8_t> encode_jpeg(const Image& img, int quality);
Image decode_jpeg(const uint8_t* bytes, size_t size);
void save_jpeg(const Image& img, const std::filesystem::path& path, int quality);

Image resize_bilinear(const Image& img, int out_w, int out_h);

// PSNR over all channels; returns +inf for identical images.
double psnr(const Image& a, const Image& b);

}  // namespace glowsign
