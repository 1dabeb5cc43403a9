#include "oxy/fibre.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "oxy/image_io.hpp"

namespace oxy {

void BundleSpec::validate() const {
    if (n_spot_target < 0) throw std::invalid_argument("negative fibre count");
    if (n_spot_target == 0) return;
    if (!(r > 0.0) || !(r < d / 2.0)) throw std::invalid_argument("fibre cores need 0 < r < d/2");
    if (bundle_radius && !(*bundle_radius > 0.0)) throw std::invalid_argument("bundle radius must be > 0");
}

BundleSpec BundleSpec::scaled(double factor) const {
    BundleSpec s = *this;
    s.r *= factor;
    s.d *= factor;
    if (s.bundle_radius) *s.bundle_radius *= factor;
    return s;
}

BundleSpec BundleSpec::preset(int n_spot) {
    switch (n_spot) {
        case 0: return {0, 0.0, 0.0, std::nullopt};
        case 121: return {121, 4.0, 16.0, std::nullopt};
        case 171: return {171, 3.5, 14.0, std::nullopt};
        case 300: return {300, 2.6, 10.0, std::nullopt};
        default: throw std::invalid_argument("no fibre preset for n_spot = " + std::to_string(n_spot));
    }
}

std::vector<Point> generate_hex_grid(int width, int height, double d) {
    std::vector<Point> pts;
    if (width <= 0 || height <= 0) return pts;
    if (!(d > 0.0)) throw std::invalid_argument("lattice spacing must be > 0");
    constexpr double tol = 1e-9;
    const double cx = width / 2.0;
    const double cy = height / 2.0;
    const double pitch = d * std::sqrt(3.0) / 2.0;
    const int rows = static_cast<int>(std::ceil(cy / pitch)) + 1;
    const int cols = static_cast<int>(std::ceil(cx / d)) + 1;
    for (int j = -rows; j <= rows; ++j) {
        const double y = cy + j * pitch;
        if (y < -tol || y > height + tol) continue;
        const double shift = (std::abs(j) % 2 == 1) ? 0.5 * d : 0.0;
        for (int i = -cols - 1; i <= cols; ++i) {
            const double x = cx + i * d + shift;
            if (x < -tol || x > width + tol) continue;
            pts.push_back({x, y});
        }
    }
    return pts;
}

std::vector<int> FibreMask::label_image() const {
    std::vector<int> labels(static_cast<std::size_t>(width) * height, -1);
    for (std::size_t f = 0; f < footprints.size(); ++f) {
        for (std::size_t p : footprints[f]) labels[p] = static_cast<int>(f);
    }
    return labels;
}

FibreMask generate_mask(const BundleSpec& spec, int width, int height) {
    spec.validate();
    FibreMask mask;
    mask.width = width;
    mask.height = height;
    mask.r = spec.r;
    mask.bundle_radius = spec.bundle_radius.value_or(height / 2.0);
    if (spec.n_spot_target == 0) return mask;

    const double cx = width / 2.0;
    const double cy = height / 2.0;
    const auto lattice = generate_hex_grid(width, height, spec.d);

    // distance keys are quantised so mirror-symmetric centres tie exactly
    struct Ranked {
        std::int64_t dist_key;
        double angle;
        double x;
        Point p;
        double dist;
    };
    std::vector<Ranked> ranked;
    ranked.reserve(lattice.size());
    for (const Point& p : lattice) {
        const double dx = p.x - cx, dy = p.y - cy;
        const double dist = std::hypot(dx, dy);
        ranked.push_back({std::llround(dist * 1e6), std::atan2(dy, dx), p.x, p, dist});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        return std::tie(a.dist_key, a.angle, a.x) < std::tie(b.dist_key, b.angle, b.x);
    });

    mask.untrimmed_count = static_cast<std::size_t>(std::count_if(
        ranked.begin(), ranked.end(), [&](const Ranked& c) { return c.dist <= mask.bundle_radius + 1e-9; }));
    const auto target = static_cast<std::size_t>(spec.n_spot_target);
    if (static_cast<double>(mask.untrimmed_count) < 0.95 * static_cast<double>(target) || ranked.size() < target) {
        throw std::runtime_error("bundle holds " + std::to_string(mask.untrimmed_count) + " fibres, cannot reach the target of " +
                                 std::to_string(target));
    }

    const double r2 = spec.r * spec.r;
    for (std::size_t k = 0; k < target; ++k) {
        const Point c = ranked[k].p;
        mask.centres.push_back(c);
        std::vector<std::size_t> footprint;
        const int x0 = std::max(0, static_cast<int>(std::floor(c.x - spec.r)));
        const int x1 = std::min(width - 1, static_cast<int>(std::ceil(c.x + spec.r)));
        const int y0 = std::max(0, static_cast<int>(std::floor(c.y - spec.r)));
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil(c.y + spec.r)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double dx = x + 0.5 - c.x, dy = y + 0.5 - c.y;
                if (dx * dx + dy * dy < r2) footprint.push_back(static_cast<std::size_t>(y) * width + x);
            }
        }
        mask.footprints.push_back(std::move(footprint));
    }

    std::vector<bool> taken(static_cast<std::size_t>(width) * height, false);
    for (const auto& fp : mask.footprints) {
        for (std::size_t p : fp) {
            if (taken[p]) throw std::logic_error("fibre footprints overlap");
            taken[p] = true;
        }
    }
    return mask;
}

Hypercube apply_mask(const Hypercube& cube, const FibreMask& mask) {
    if (cube.width != mask.width || cube.height != mask.height) {
        throw std::invalid_argument("fibre mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                                    ", cube is " + std::to_string(cube.width) + "x" + std::to_string(cube.height));
    }
    Hypercube out(cube.width, cube.height, cube.grid, 0.0f);
    const std::size_t n = cube.plane_size();
    const int bands = cube.grid.bands;

#pragma omp parallel
    {
        std::vector<double> acc(bands);
#pragma omp for schedule(dynamic, 8)
        for (std::int64_t f = 0; f < static_cast<std::int64_t>(mask.footprints.size()); ++f) {
            const auto& fp = mask.footprints[f];
            std::fill(acc.begin(), acc.end(), 0.0);
            std::size_t used = 0;
            for (std::size_t p : fp) {
                bool saturated = false;
                for (int b = 0; b < bands && !saturated; ++b) saturated = std::isnan(cube.data[b * n + p]);
                if (saturated) continue;
                for (int b = 0; b < bands; ++b) acc[b] += cube.data[b * n + p];
                ++used;
            }
            for (int b = 0; b < bands; ++b) {
                const float v = used ? static_cast<float>(acc[b] / static_cast<double>(used)) : std::numeric_limits<float>::quiet_NaN();
                for (std::size_t p : fp) out.data[b * n + p] = v;
            }
        }
    }
    return out;
}

void save_mask_csv(const FibreMask& mask, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "fibre_id,cx,cy,r\n";
    out.precision(17);
    for (std::size_t f = 0; f < mask.centres.size(); ++f) {
        out << f << ',' << mask.centres[f].x << ',' << mask.centres[f].y << ',' << mask.r << '\n';
    }
}

void save_mask_png(const FibreMask& mask, const std::filesystem::path& path) {
    std::vector<std::uint8_t> px(static_cast<std::size_t>(mask.width) * mask.height, 0);
    for (const auto& fp : mask.footprints) {
        for (std::size_t p : fp) px[p] = 255;
    }
    write_png_gray8(path, mask.width, mask.height, px);
}

}  // namespace oxy
