#include "oxy/oximetry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace oxy {

std::vector<double> forward_spectrum(double sto2, double total_hb, double offset, const ChromophoreTable& table) {
    if (!(total_hb > 0.0)) throw std::invalid_argument("total haemoglobin must be > 0");
    if (!(sto2 >= 0.0 && sto2 <= 1.0)) throw std::invalid_argument("StO2 must lie in [0, 1]");
    std::vector<double> a(table.grid.bands);
    for (int b = 0; b < table.grid.bands; ++b) {
        a[b] = total_hb * (sto2 * table.eps_hbo2[b] + (1.0 - sto2) * table.eps_hb[b]) + offset;
    }
    return a;
}

std::vector<double> reflectance_from_attenuation(std::span<const double> attenuation, std::span<const double> white_ref) {
    if (attenuation.size() != white_ref.size()) throw std::invalid_argument("attenuation and white reference differ in length");
    std::vector<double> out(attenuation.size());
    for (std::size_t b = 0; b < out.size(); ++b) out[b] = white_ref[b] * std::pow(10.0, -attenuation[b]);
    return out;
}

BeerLambertFitter::BeerLambertFitter(const ChromophoreTable& table) {
    table.validate();
    const int n = table.grid.bands;
    if (n < 3) throw std::invalid_argument("a three-parameter fit needs at least three bands");
    design_.resize(n, 3);
    for (int b = 0; b < n; ++b) {
        design_(b, 0) = table.eps_hbo2[b];
        design_(b, 1) = table.eps_hb[b];
        design_(b, 2) = 1.0;
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design_);
    if (cod.rank() < 3) throw std::logic_error("singular Beer-Lambert design matrix");
    pinv_ = cod.pseudoInverse();
}

OximetryFit BeerLambertFitter::fit_attenuation(std::span<const double> attenuation) const {
    const int n = bands();
    if (static_cast<int>(attenuation.size()) != n) throw std::invalid_argument("spectrum length does not match the table");
    const Eigen::Map<const Eigen::VectorXd> a(attenuation.data(), n);
    const Eigen::Vector3d beta = pinv_ * a;

    const double mean = a.mean();
    const double ss_tot = (a.array() - mean).square().sum();
    const double ss_res = (a - design_ * beta).squaredNorm();
    double cod;
    if (ss_tot > 0.0) {
        cod = std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
    } else {
        cod = ss_res == 0.0 ? 1.0 : 0.0;
    }
    return {std::max(beta[0], 0.0), std::max(beta[1], 0.0), beta[2], cod};
}

OximetryFit BeerLambertFitter::fit(std::span<const double> intensity, std::span<const double> white_ref) const {
    const int n = bands();
    if (static_cast<int>(intensity.size()) != n || static_cast<int>(white_ref.size()) != n) {
        throw std::invalid_argument("spectrum length does not match the table");
    }
    std::vector<double> a(n);
    for (int b = 0; b < n; ++b) {
        if (!(intensity[b] > 0.0) || !std::isfinite(intensity[b]) || !(white_ref[b] > 0.0) || !std::isfinite(white_ref[b])) {
            throw std::invalid_argument("intensities and white reference must be finite and > 0");
        }
        a[b] = -std::log10(intensity[b] / white_ref[b]);
    }
    return fit_attenuation(a);
}

OximetryFit fit_pixel(std::span<const double> intensity, std::span<const double> white_ref, const ChromophoreTable& table) {
    return BeerLambertFitter(table).fit(intensity, white_ref);
}

StO2Map estimate_sto2_map(const Hypercube& cube, std::span<const double> white_ref, const ChromophoreTable& table,
                          double cod_threshold) {
    if (cube.grid != table.grid) throw std::invalid_argument("cube bands do not match the chromophore table grid");
    const int bands = cube.grid.bands;
    if (static_cast<int>(white_ref.size()) != bands) throw std::invalid_argument("white reference length does not match the cube");
    for (double w : white_ref) {
        if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("white reference must be finite and > 0");
    }

    const BeerLambertFitter fitter(table);
    StO2Map map(cube.width, cube.height);
    const std::size_t n = cube.plane_size();

#pragma omp parallel
    {
        std::vector<double> a(bands);
#pragma omp for schedule(static)
        for (std::int64_t p = 0; p < static_cast<std::int64_t>(n); ++p) {
            MaskCode code = MaskCode::effective;
            for (int b = 0; b < bands && code == MaskCode::effective; ++b) {
                const double v = cube.data[b * n + p];
                if (std::isnan(v)) {
                    code = MaskCode::saturated;
                } else if (!(v > 0.0)) {
                    code = MaskCode::non_tissue;
                } else {
                    a[b] = -std::log10(v / white_ref[b]);
                }
            }
            // saturation wins over a dark band elsewhere in the spectrum
            if (code == MaskCode::non_tissue) {
                for (int b = 0; b < bands; ++b) {
                    if (std::isnan(cube.data[b * n + p])) code = MaskCode::saturated;
                }
            }
            float value = 0.0f;
            if (code == MaskCode::effective) {
                const OximetryFit fit = fitter.fit_attenuation(a);
                if (fit.cod <= cod_threshold) {
                    code = MaskCode::low_cod;
                } else if (!fit.sto2_defined()) {
                    code = MaskCode::non_tissue;
                } else {
                    value = static_cast<float>(fit.sto2());
                }
            }
            map.values[p] = value;
            map.mask.codes[p] = code;
        }
    }
    return map;
}

std::vector<double> flat_white_reference(const WavelengthGrid& grid) { return std::vector<double>(grid.bands, 1.0); }

std::vector<double> load_white_reference_csv(const std::filesystem::path& path, const WavelengthGrid& grid) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open white reference " + path.string());
    std::vector<double> ref(grid.bands, 0.0);
    std::vector<bool> seen(grid.bands, false);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        double nm = 0, v = 0;
        if (!(fields >> nm >> v)) throw std::runtime_error("malformed white reference row: " + line);
        const int b = grid.index_of(nm);
        ref[b] = v;
        seen[b] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) throw std::runtime_error("white reference does not cover every band");
    return ref;
}

void save_sto2_map(const StO2Map& map, const std::filesystem::path& path) {
    if (map.mask.width != map.width || map.mask.height != map.height) throw std::invalid_argument("map and mask sizes differ");
    Hypercube cube(map.width, map.height, WavelengthGrid{0.0, 1.0, 2});
    std::copy(map.values.begin(), map.values.end(), cube.data.begin());
    const std::size_t plane = map.values.size();
    for (std::size_t i = 0; i < plane; ++i) cube.data[plane + i] = static_cast<float>(map.mask.codes[i]);
    save_cube(cube, path);
}

StO2Map load_sto2_map(const std::filesystem::path& path) {
    const Hypercube cube = load_cube(path);
    if (cube.grid.bands != 2) throw std::runtime_error(path.string() + ": StO2 map files hold exactly two bands");
    StO2Map map(cube.width, cube.height);
    const std::size_t plane = map.values.size();
    std::copy(cube.data.begin(), cube.data.begin() + static_cast<std::ptrdiff_t>(plane), map.values.begin());
    for (std::size_t i = 0; i < plane; ++i) {
        const float c = cube.data[plane + i];
        if (!(c == 0.0f || c == 1.0f || c == 2.0f || c == 3.0f)) throw std::runtime_error(path.string() + ": invalid mask code");
        map.mask.codes[i] = static_cast<MaskCode>(static_cast<int>(c));
    }
    return map;
}

}  // namespace oxy
