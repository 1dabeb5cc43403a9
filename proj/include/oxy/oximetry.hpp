#pragma once

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "oxy/hypercube.hpp"

namespace oxy {

/// Haemoglobin extinction spectra (L mmol^-1 cm^-1) on a wavelength grid.
struct ChromophoreTable {
    WavelengthGrid grid;
    std::vector<double> eps_hbo2;
    std::vector<double> eps_hb;

    void validate() const;

    /// Built-in table (460-690 nm, 10 nm), identical to assets/extinction_hb_v1.csv.
    static ChromophoreTable builtin();
    static ChromophoreTable load_csv(const std::filesystem::path& path);
    static ChromophoreTable parse_csv(std::string_view text);
    /// Restricts the table to the bands of `grid`; every band must be present.
    ChromophoreTable resampled_to(const WavelengthGrid& grid) const;
};

struct OximetryFit {
    double c_hbo2 = 0.0;  // clamped to >= 0
    double c_hb = 0.0;    // clamped to >= 0
    double offset = 0.0;
    double cod = 0.0;     // R^2 of the unclamped fit

    bool sto2_defined() const { return c_hbo2 + c_hb > 0.0; }
    double sto2() const { return c_hbo2 / (c_hbo2 + c_hb); }
};

/// Attenuation A(lambda) = total_hb * (sto2 eps_HbO2 + (1 - sto2) eps_Hb) + offset.
std::vector<double> forward_spectrum(double sto2, double total_hb, double offset, const ChromophoreTable& table);
/// I = I0 * 10^-A.
std::vector<double> reflectance_from_attenuation(std::span<const double> attenuation, std::span<const double> white_ref);

/// Least-squares solver for A = [eps_HbO2, eps_Hb, 1] * beta, with the
/// pseudo-inverse of the design matrix factored once per table.
class BeerLambertFitter {
public:
    explicit BeerLambertFitter(const ChromophoreTable& table);

    int bands() const { return static_cast<int>(design_.rows()); }
    /// Fits an attenuation spectrum directly.
    OximetryFit fit_attenuation(std::span<const double> attenuation) const;
    /// Fits reflectance against a white reference; throws on non-positive or non-finite input.
    OximetryFit fit(std::span<const double> intensity, std::span<const double> white_ref) const;

private:
    Eigen::MatrixXd design_;
    Eigen::MatrixXd pinv_;
};

OximetryFit fit_pixel(std::span<const double> intensity, std::span<const double> white_ref, const ChromophoreTable& table);

struct StO2Map {
    int width = 0;
    int height = 0;
    std::vector<float> values;  // 0 on non-effective pixels
    PixelMask mask;

    StO2Map() = default;
    StO2Map(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0f), mask(w, h) {}

    float& at(int x, int y) { return values[y * static_cast<std::size_t>(width) + x]; }
    float at(int x, int y) const { return values[y * static_cast<std::size_t>(width) + x]; }
};

inline constexpr double kDefaultCodThreshold = 0.85;

/// Per-pixel regression. NaN input -> saturated; CoD <= threshold -> low_cod;
/// zero haemoglobin (or non-positive intensity) -> non_tissue; else effective.
StO2Map estimate_sto2_map(const Hypercube& cube, std::span<const double> white_ref, const ChromophoreTable& table,
                          double cod_threshold = kDefaultCodThreshold);

/// Flat white reference (I0 = 1) sized for the grid.
std::vector<double> flat_white_reference(const WavelengthGrid& grid);
/// CSV rows: wavelength_nm, value.
std::vector<double> load_white_reference_csv(const std::filesystem::path& path, const WavelengthGrid& grid);

// Map files reuse the cube container with two bands: StO2 values, then the
// mask code of each pixel.
void save_sto2_map(const StO2Map& map, const std::filesystem::path& path);
StO2Map load_sto2_map(const std::filesystem::path& path);

}  // namespace oxy
