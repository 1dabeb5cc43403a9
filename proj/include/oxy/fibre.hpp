#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "oxy/hypercube.hpp"

namespace oxy {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Fibre-bundle geometry in pixel units. n_spot_target = 0 is the empty
/// (RGB-only) bundle.
struct BundleSpec {
    int n_spot_target = 0;
    double r = 0.0;  // core radius
    double d = 0.0;  // centre spacing
    std::optional<double> bundle_radius;  // defaults to height / 2

    double gamma() const { return d > 0.0 ? r / d : 0.0; }
    void validate() const;
    /// Scales r, d and an explicit bundle radius, e.g. for a downsampled image.
    BundleSpec scaled(double factor) const;

    /// Fibre presets for n_spot in {0, 121, 171, 300}.
    static BundleSpec preset(int n_spot);
};

/// Lattice with horizontal pitch d, row pitch d*sqrt(3)/2 and odd rows
/// shifted by d/2, anchored on the image centre and clipped to [0,W]x[0,H].
std::vector<Point> generate_hex_grid(int width, int height, double d);

struct FibreMask {
    int width = 0;
    int height = 0;
    double r = 0.0;
    double bundle_radius = 0.0;
    std::size_t untrimmed_count = 0;  // lattice centres within bundle_radius
    std::vector<Point> centres;
    std::vector<std::vector<std::size_t>> footprints;  // pixel indices y*W+x per fibre

    std::size_t size() const { return centres.size(); }
    /// Per-pixel fibre id, -1 for background.
    std::vector<int> label_image() const;
};

/// Keeps the lattice centres nearest the image centre (ties by angle, then x).
/// A lattice holding more than n_spot_target centres inside the bundle is
/// trimmed; one short by at most 5% is topped up with the next-nearest
/// lattice centres; a larger shortfall throws.
FibreMask generate_mask(const BundleSpec& spec, int width, int height);

/// Averages each footprint's spectra (ignoring NaN pixels) and paints the
/// mean over the footprint; background is zero.
Hypercube apply_mask(const Hypercube& cube, const FibreMask& mask);

/// CSV: fibre_id,cx,cy,r
void save_mask_csv(const FibreMask& mask, const std::filesystem::path& path);
/// Cores white on black.
void save_mask_png(const FibreMask& mask, const std::filesystem::path& path);

}  // namespace oxy
