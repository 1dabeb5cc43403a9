#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "oxy/hypercube.hpp"

namespace oxy {

void write_png_gray8(const std::filesystem::path& path, int width, int height, std::span<const std::uint8_t> pixels);
/// Interleaved RGB8.
void write_png_rgb8(const std::filesystem::path& path, int width, int height, std::span<const std::uint8_t> pixels);

/// Quantises [0,1] to 8 bits; NaN maps to 0.
std::uint8_t to_u8(float v);

void write_png(const std::filesystem::path& path, const RgbImage& image);
void write_png(const std::filesystem::path& path, const PixelMask& mask);

/// Fixed blue-to-red colormap over [0,1]; masked pixels are drawn black.
void write_colormap_png(const std::filesystem::path& path, int width, int height, std::span<const float> values,
                        const PixelMask* mask = nullptr);

}  // namespace oxy
