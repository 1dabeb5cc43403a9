#include "oxy/raster.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oxy {

Raster to_raster(const Hypercube& cube) {
    Raster r;
    r.channels = cube.grid.bands;
    r.width = cube.width;
    r.height = cube.height;
    r.data = cube.data;
    return r;
}

Raster to_raster(const RgbImage& rgb) {
    Raster r;
    r.channels = 3;
    r.width = rgb.width;
    r.height = rgb.height;
    r.data = rgb.data;
    return r;
}

Hypercube to_cube(const Raster& raster, const WavelengthGrid& grid) {
    if (raster.channels != grid.bands) throw std::invalid_argument("raster channel count does not match the grid");
    Hypercube cube;
    cube.width = raster.width;
    cube.height = raster.height;
    cube.grid = grid;
    cube.data = raster.data;
    return cube;
}

namespace {

void check_window(int width, int height, const Window& w) {
    if (w.x < 0 || w.y < 0 || w.size <= 0 || w.x + w.size > width || w.y + w.size > height) {
        throw std::invalid_argument("crop window lies outside the image");
    }
}

}  // namespace

Raster crop(const Raster& src, const Window& w) {
    check_window(src.width, src.height, w);
    Raster out(src.channels, w.size, w.size);
    for (int c = 0; c < src.channels; ++c) {
        for (int y = 0; y < w.size; ++y) {
            const float* row = &src.data[c * src.plane_size() + (w.y + y) * static_cast<std::size_t>(src.width) + w.x];
            std::copy(row, row + w.size, &out.at(c, y, 0));
        }
    }
    return out;
}

PixelMask crop(const PixelMask& src, const Window& w) {
    check_window(src.width, src.height, w);
    PixelMask out(w.size, w.size);
    for (int y = 0; y < w.size; ++y) {
        for (int x = 0; x < w.size; ++x) out.at(x, y) = src.at(w.x + x, w.y + y);
    }
    return out;
}

Raster flip(const Raster& src, Flip f) {
    if (f == Flip::none) return src;
    Raster out(src.channels, src.width, src.height);
    for (int c = 0; c < src.channels; ++c) {
        for (int y = 0; y < src.height; ++y) {
            for (int x = 0; x < src.width; ++x) {
                const int sx = f == Flip::horizontal ? src.width - 1 - x : x;
                const int sy = f == Flip::vertical ? src.height - 1 - y : y;
                out.at(c, y, x) = src.at(c, sy, sx);
            }
        }
    }
    return out;
}

PixelMask flip(const PixelMask& src, Flip f) {
    if (f == Flip::none) return src;
    PixelMask out(src.width, src.height);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            const int sx = f == Flip::horizontal ? src.width - 1 - x : x;
            const int sy = f == Flip::vertical ? src.height - 1 - y : y;
            out.at(x, y) = src.at(sx, sy);
        }
    }
    return out;
}

namespace {

struct Tap {
    int i0, i1;
    float w1;
};

std::vector<Tap> bilinear_taps(int in_size, int out_size) {
    std::vector<Tap> taps(out_size);
    const double scale = static_cast<double>(in_size) / out_size;
    for (int o = 0; o < out_size; ++o) {
        double s = (o + 0.5) * scale - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(in_size - 1));
        const int i0 = static_cast<int>(std::floor(s));
        const int i1 = std::min(i0 + 1, in_size - 1);
        taps[o] = {i0, i1, static_cast<float>(s - i0)};
    }
    return taps;
}

// std::lerp is exact at the endpoints and bounded by them; a zero weight
// must not pull in a NaN neighbour.
float lerp_nan_safe(float a, float b, float w) { return w == 0.0f ? a : std::lerp(a, b, w); }

}  // namespace

Raster resize_bilinear(const Raster& src, int out_width, int out_height) {
    if (src.width <= 0 || src.height <= 0 || out_width <= 0 || out_height <= 0) {
        throw std::invalid_argument("bilinear resize needs non-empty images");
    }
    const auto tx = bilinear_taps(src.width, out_width);
    const auto ty = bilinear_taps(src.height, out_height);
    Raster out(src.channels, out_width, out_height);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < src.channels; ++c) {
        for (int y = 0; y < out_height; ++y) {
            const Tap& v = ty[y];
            for (int x = 0; x < out_width; ++x) {
                const Tap& h = tx[x];
                const float top = lerp_nan_safe(src.at(c, v.i0, h.i0), src.at(c, v.i0, h.i1), h.w1);
                const float bot = lerp_nan_safe(src.at(c, v.i1, h.i0), src.at(c, v.i1, h.i1), h.w1);
                out.at(c, y, x) = lerp_nan_safe(top, bot, v.w1);
            }
        }
    }
    return out;
}

PixelMask resize_nearest(const PixelMask& src, int out_width, int out_height) {
    if (src.width <= 0 || src.height <= 0 || out_width <= 0 || out_height <= 0) {
        throw std::invalid_argument("nearest resize needs non-empty images");
    }
    PixelMask out(out_width, out_height);
    for (int y = 0; y < out_height; ++y) {
        const int sy = std::min(static_cast<int>((y + 0.5) * src.height / out_height), src.height - 1);
        for (int x = 0; x < out_width; ++x) {
            const int sx = std::min(static_cast<int>((x + 0.5) * src.width / out_width), src.width - 1);
            out.at(x, y) = src.at(sx, sy);
        }
    }
    return out;
}

void fill_nan(Raster& r, float value) {
    for (float& v : r.data) {
        if (std::isnan(v)) v = value;
    }
}

}  // namespace oxy
