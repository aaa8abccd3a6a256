#include "glowsign/image.hpp"

#include <algorithm>
#include <csetjmp>
#include <cstddef>
#include <cstdio>
#include <cstring>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>

#include <jpeglib.h>
#include <png.h>

#include "glowsign/error.hpp"

namespace glowsign {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    return f;
}

Image load_png_file(std::FILE* fp, const std::filesystem::path& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed to decode PNG '" + path.string() + "'");
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_gray_to_rgb(png);
    // Alpha is dropped on load; dataset images are RGB.
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    Image img(static_cast<int>(png_get_image_width(png, info)),
              static_cast<int>(png_get_image_height(png, info)), 3);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) rows[y] = img.pixel(0, y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

Image load_ppm_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string magic;
    in >> magic;
    if (magic != "P6") throw IoError("unsupported PPM variant in '" + path.string() + "'");
    int w = 0, h = 0, maxval = 0;
    in >> w >> h >> maxval;
    in.get();
    if (w <= 0 || h <= 0 || maxval != 255)
        throw IoError("unsupported PPM header in '" + path.string() + "'");
    Image img(w, h, 3);
    in.read(reinterpret_cast<char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
    if (!in) throw IoError("truncated PPM '" + path.string() + "'");
    return img;
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    longjmp(mgr->jump, 1);
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
    auto f = open_file(path, "rb");
    unsigned char magic[8] = {0};
    const size_t got = std::fread(magic, 1, sizeof(magic), f.get());
    std::rewind(f.get());
    if (got >= 8 && png_sig_cmp(magic, 0, 8) == 0) return load_png_file(f.get(), path);
    if (got >= 2 && magic[0] == 0xFF && magic[1] == 0xD8) {
        std::fseek(f.get(), 0, SEEK_END);
        const long size = std::ftell(f.get());
        std::rewind(f.get());
        std::vector<uint8_t> bytes(static_cast<size_t>(size));
        if (std::fread(bytes.data(), 1, bytes.size(), f.get()) != bytes.size())
            throw IoError("failed to read '" + path.string() + "'");
        return decode_jpeg(bytes.data(), bytes.size());
    }
    if (got >= 2 && magic[0] == 'P' && magic[1] == '6') {
        f.reset();
        return load_ppm_file(path);
    }
    throw IoError("unrecognized image format in '" + path.string() + "'");
}

void save_png(const Image& img, const std::filesystem::path& path) {
    if (img.empty() || (img.channels != 3 && img.channels != 4))
        throw InvalidInputError("save_png: image must be non-empty RGB or RGBA");
    auto f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode PNG '" + path.string() + "'");
    }
    png_init_io(png, f.get());
    // Fixed encode settings keep output bytes reproducible run to run.
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8,
                 img.channels == 4 ? PNG_COLOR_TYPE_RGBA : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.pixel(0, y));
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void save_ppm(const Image& img, const std::filesystem::path& path) {
    if (img.channels != 3) throw InvalidInputError("save_ppm: RGB images only");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "'");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out) throw IoError("failed to write '" + path.string() + "'");
}

std::vector<uint8_t> encode_jpeg(const Image& img, int quality) {
    if (quality < 1 || quality > 100)
        throw InvalidInputError("JPEG quality must be in [1, 100]");
    if (img.channels != 3) throw InvalidInputError("encode_jpeg: RGB images only");

    jpeg_compress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    unsigned char* buffer = nullptr;
    unsigned long buffer_size = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        if (buffer) free(buffer);
        throw IoError("JPEG encode failed");
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &buffer, &buffer_size);
    cinfo.image_width = static_cast<JDIMENSION>(img.width);
    cinfo.image_height = static_cast<JDIMENSION>(img.height);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    if (quality >= 90) {
        // 4:4:4 at high quality; chroma subsampling would dominate the loss.
        cinfo.comp_info[0].h_samp_factor = 1;
        cinfo.comp_info[0].v_samp_factor = 1;
    }
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = const_cast<JSAMPROW>(img.pixel(0, static_cast<int>(cinfo.next_scanline)));
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    std::vector<uint8_t> out(buffer, buffer + buffer_size);
    jpeg_destroy_compress(&cinfo);
    free(buffer);
    return out;
}

Image decode_jpeg(const uint8_t* bytes, size_t size) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw IoError("JPEG decode failed");
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, const_cast<unsigned char*>(bytes), static_cast<unsigned long>(size));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    Image img(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height), 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = img.pixel(0, static_cast<int>(cinfo.output_scanline));
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

void save_jpeg(const Image& img, const std::filesystem::path& path, int quality) {
    const std::vector<uint8_t> bytes = encode_jpeg(img, quality);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed to write '" + path.string() + "'");
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
    if (img.empty()) throw InvalidInputError("resize_bilinear: empty image");
    if (out_w <= 0 || out_h <= 0) throw InvalidInputError("resize_bilinear: bad output size");
    Image out(out_w, out_h, img.channels);
    const double sx = static_cast<double>(img.width) / out_w;
    const double sy = static_cast<double>(img.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, img.height - 1);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double wy = std::clamp(fy - y0, 0.0, 1.0);
        for (int x = 0; x < out_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, img.width - 1);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double wx = std::clamp(fx - x0, 0.0, 1.0);
            for (int c = 0; c < img.channels; ++c) {
                const double v00 = img.pixel(x0, y0)[c];
                const double v10 = img.pixel(x1, y0)[c];
                const double v01 = img.pixel(x0, y1)[c];
                const double v11 = img.pixel(x1, y1)[c];
                const double v = (1 - wy) * ((1 - wx) * v00 + wx * v10) +
                                 wy * ((1 - wx) * v01 + wx * v11);
                out.pixel(x, y)[c] = static_cast<uint8_t>(std::lround(v));
            }
        }
    }
    return out;
}

double psnr(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw InvalidInputError("psnr: image dimensions differ");
    double mse = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace glowsign
