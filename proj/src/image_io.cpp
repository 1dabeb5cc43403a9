#include "oxy/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace oxy {

namespace {

void write_png_impl(const std::filesystem::path& path, int width, int height, int color_type, int channels,
                    std::span<const std::uint8_t> pixels) {
    if (pixels.size() != static_cast<std::size_t>(width) * height * channels) {
        throw std::invalid_argument("PNG pixel buffer does not match dimensions");
    }
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp) throw std::runtime_error("cannot write PNG " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width * channels));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_gray8(const std::filesystem::path& path, int width, int height, std::span<const std::uint8_t> pixels) {
    write_png_impl(path, width, height, PNG_COLOR_TYPE_GRAY, 1, pixels);
}

void write_png_rgb8(const std::filesystem::path& path, int width, int height, std::span<const std::uint8_t> pixels) {
    write_png_impl(path, width, height, PNG_COLOR_TYPE_RGB, 3, pixels);
}

std::uint8_t to_u8(float v) {
    if (std::isnan(v)) return 0;
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
    std::vector<std::uint8_t> buf(image.plane_size() * 3);
    for (std::size_t p = 0; p < image.plane_size(); ++p) {
        for (int c = 0; c < 3; ++c) buf[p * 3 + c] = to_u8(image.data[c * image.plane_size() + p]);
    }
    write_png_rgb8(path, image.width, image.height, buf);
}

void write_png(const std::filesystem::path& path, const PixelMask& mask) {
    std::vector<std::uint8_t> buf(mask.codes.size());
    std::transform(mask.codes.begin(), mask.codes.end(), buf.begin(), mask_gray_level);
    write_png_gray8(path, mask.width, mask.height, buf);
}

void write_colormap_png(const std::filesystem::path& path, int width, int height, std::span<const float> values,
                        const PixelMask* mask) {
    // piecewise-linear blue -> cyan -> yellow -> red
    constexpr float stops[4][3] = {{0.0f, 0.0f, 0.6f}, {0.0f, 0.8f, 1.0f}, {1.0f, 0.9f, 0.0f}, {0.8f, 0.0f, 0.0f}};
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(width) * height * 3, 0);
    for (std::size_t p = 0; p < values.size(); ++p) {
        if (mask && mask->codes[p] != MaskCode::effective) continue;
        const float v = values[p];
        if (std::isnan(v)) continue;
        const float t = std::clamp(v, 0.0f, 1.0f) * 3.0f;
        const int i = std::min(static_cast<int>(t), 2);
        const float f = t - i;
        for (int c = 0; c < 3; ++c) buf[p * 3 + c] = to_u8(stops[i][c] * (1 - f) + stops[i + 1][c] * f);
    }
    write_png_rgb8(path, width, height, buf);
}

}  // namespace oxy
