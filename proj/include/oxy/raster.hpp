#pragma once

#include <cstdint>
#include <vector>

#include "oxy/hypercube.hpp"

namespace oxy {

/// Planar multi-channel float image (channel-major, then row-major).
struct Raster {
    int channels = 0;
    int width = 0;
    int height = 0;
    std::vector<float> data;

    Raster() = default;
    Raster(int c, int w, int h, float fill = 0.0f)
        : channels(c), width(w), height(h), data(static_cast<std::size_t>(c) * w * h, fill) {}

    std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
    float& at(int c, int y, int x) { return data[c * plane_size() + y * static_cast<std::size_t>(width) + x]; }
    float at(int c, int y, int x) const { return data[c * plane_size() + y * static_cast<std::size_t>(width) + x]; }

    bool operator==(const Raster&) const = default;
};

struct Window {
    int x = 0;
    int y = 0;
    int size = 0;
};

enum class Flip { none, horizontal, vertical };

Raster to_raster(const Hypercube& cube);
Raster to_raster(const RgbImage& rgb);
Hypercube to_cube(const Raster& raster, const WavelengthGrid& grid);

Raster crop(const Raster& src, const Window& w);
PixelMask crop(const PixelMask& src, const Window& w);
Raster flip(const Raster& src, Flip f);
PixelMask flip(const PixelMask& src, Flip f);

/// Half-pixel-centre bilinear resampling with edge clamping. NaN inputs propagate.
Raster resize_bilinear(const Raster& src, int out_width, int out_height);
/// Nearest-neighbour resampling, so codes stay within the original code set.
PixelMask resize_nearest(const PixelMask& src, int out_width, int out_height);

/// Replaces NaN with the given value in place.
void fill_nan(Raster& r, float value = 0.0f);

}  // namespace oxy
