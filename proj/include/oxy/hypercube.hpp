#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace oxy {

/// Uniform wavelength sampling of a cube's spectral axis.
struct WavelengthGrid {
    double start_nm = 460.0;
    double step_nm = 10.0;
    int bands = 24;

    double wavelength(int band) const { return start_nm + step_nm * band; }
    /// Band index for an on-grid wavelength; throws std::invalid_argument otherwise.
    int index_of(double nm) const;
    void validate() const;

    bool operator==(const WavelengthGrid&) const = default;
};

/// Reflectance raster. Storage is band-sequential: band-major, then row-major,
/// which is also the on-disk payload order. Saturated samples are NaN.
struct Hypercube {
    int width = 0;
    int height = 0;
    WavelengthGrid grid;
    std::vector<float> data;

    Hypercube() = default;
    Hypercube(int w, int h, WavelengthGrid g, float fill = 0.0f);

    std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
    float& at(int x, int y, int band) { return data[band * plane_size() + y * static_cast<std::size_t>(width) + x]; }
    float at(int x, int y, int band) const { return data[band * plane_size() + y * static_cast<std::size_t>(width) + x]; }
    std::span<float> band(int b) { return {data.data() + b * plane_size(), plane_size()}; }
    std::span<const float> band(int b) const { return {data.data() + b * plane_size(), plane_size()}; }

    /// Copies the spectrum of pixel (x, y) into out (size grid.bands).
    void spectrum(int x, int y, std::span<double> out) const;
    bool pixel_saturated(int x, int y) const;

    void validate() const;
    bool operator==(const Hypercube&) const = default;
};

/// Camera colour sensitivity: 3 rows (R, G, B) by bands columns.
struct SpectralResponse {
    WavelengthGrid grid;
    std::vector<double> weights;  // row-major 3 x bands

    double weight(int channel, int band) const { return weights[channel * grid.bands + band]; }
    double row_sum(int channel) const;
    void validate() const;

    /// Gaussian R, G, B channels centred at 620/540/460 nm, sigma 30 nm, rows summing to 1.
    static SpectralResponse gaussian_default(const WavelengthGrid& grid = {});
    /// CSV rows: wavelength_nm, r, g, b. Wavelengths must match the grid order.
    static SpectralResponse load_csv(const std::filesystem::path& path, const WavelengthGrid& grid = {});
};

/// Planar 3-channel image (R plane, G plane, B plane).
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), data(3 * static_cast<std::size_t>(w) * h, 0.0f) {}

    std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
    float& at(int x, int y, int c) { return data[c * plane_size() + y * static_cast<std::size_t>(width) + x]; }
    float at(int x, int y, int c) const { return data[c * plane_size() + y * static_cast<std::size_t>(width) + x]; }
};

enum class MaskCode : std::uint8_t { effective = 0, saturated = 1, low_cod = 2, non_tissue = 3 };

/// Per-pixel exclusion reasons.
struct PixelMask {
    int width = 0;
    int height = 0;
    std::vector<MaskCode> codes;

    PixelMask() = default;
    PixelMask(int w, int h, MaskCode fill = MaskCode::effective)
        : width(w), height(h), codes(static_cast<std::size_t>(w) * h, fill) {}

    MaskCode& at(int x, int y) { return codes[y * static_cast<std::size_t>(width) + x]; }
    MaskCode at(int x, int y) const { return codes[y * static_cast<std::size_t>(width) + x]; }
    std::size_t count(MaskCode code) const;
    std::size_t n_effective() const { return count(MaskCode::effective); }

    bool operator==(const PixelMask&) const = default;
};

/// 8-bit gray level used when a mask is exported as PNG.
std::uint8_t mask_gray_level(MaskCode code);

// Container I/O. Header: key=value lines (magic OXC1, width, height, bands,
// start_nm, step_nm), blank line, then little-endian float32 payload.
Hypercube load_cube(const std::filesystem::path& path);
void save_cube(const Hypercube& cube, const std::filesystem::path& path);
std::string encode_cube_header(const Hypercube& cube);

enum class Clamp { yes, no };

/// Each channel is the row-sum normalised dot product of the pixel spectrum
/// with that channel's response. NaN anywhere in a spectrum gives NaN RGB.
RgbImage synthesize_rgb(const Hypercube& cube, const SpectralResponse& response, Clamp clamp = Clamp::yes);

/// Three-band false-colour preview; the default bands are 460, 520, 590 nm.
RgbImage extract_bands(const Hypercube& cube, std::span<const double> wavelengths_nm);
RgbImage extract_bands(const Hypercube& cube);

}  // namespace oxy
