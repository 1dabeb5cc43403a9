#include "oxy/hypercube.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace oxy {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

int WavelengthGrid::index_of(double nm) const {
    const double pos = (nm - start_nm) / step_nm;
    const double idx = std::round(pos);
    if (std::abs(pos - idx) > 1e-9 || idx < 0 || idx >= bands) {
        throw std::invalid_argument("wavelength " + std::to_string(nm) + " nm is not on the cube grid");
    }
    return static_cast<int>(idx);
}

void WavelengthGrid::validate() const {
    if (!(step_nm > 0.0) || bands < 1) {
        throw std::invalid_argument("wavelength grid needs step_nm > 0 and bands >= 1");
    }
}

Hypercube::Hypercube(int w, int h, WavelengthGrid g, float fill)
    : width(w), height(h), grid(g), data(static_cast<std::size_t>(w) * h * g.bands, fill) {}

void Hypercube::spectrum(int x, int y, std::span<double> out) const {
    const std::size_t offset = y * static_cast<std::size_t>(width) + x;
    for (int b = 0; b < grid.bands; ++b) out[b] = data[b * plane_size() + offset];
}

bool Hypercube::pixel_saturated(int x, int y) const {
    const std::size_t offset = y * static_cast<std::size_t>(width) + x;
    for (int b = 0; b < grid.bands; ++b) {
        if (std::isnan(data[b * plane_size() + offset])) return true;
    }
    return false;
}

void Hypercube::validate() const {
    grid.validate();
    if (width < 0 || height < 0) throw std::invalid_argument("negative cube dimensions");
    if (data.size() != plane_size() * grid.bands) throw std::invalid_argument("cube payload size does not match dimensions");
    for (float v : data) {
        if (!std::isnan(v) && (!std::isfinite(v) || v < 0.0f)) {
            throw std::invalid_argument("cube holds a negative or infinite reflectance");
        }
    }
}

double SpectralResponse::row_sum(int channel) const {
    double s = 0.0;
    for (int b = 0; b < grid.bands; ++b) s += weight(channel, b);
    return s;
}

void SpectralResponse::validate() const {
    grid.validate();
    if (weights.size() != 3u * grid.bands) throw std::invalid_argument("spectral response must be 3 x bands");
    for (int c = 0; c < 3; ++c) {
        bool positive = false;
        for (int b = 0; b < grid.bands; ++b) {
            const double w = weight(c, b);
            if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("spectral response weights must be finite and >= 0");
            positive = positive || w > 0.0;
        }
        if (!positive) throw std::invalid_argument("spectral response channel has no positive weight");
    }
}

SpectralResponse SpectralResponse::gaussian_default(const WavelengthGrid& grid) {
    constexpr double centres[3] = {620.0, 540.0, 460.0};  // R, G, B
    constexpr double sigma = 30.0;
    SpectralResponse r{grid, std::vector<double>(3u * grid.bands)};
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (int b = 0; b < grid.bands; ++b) {
            const double z = (grid.wavelength(b) - centres[c]) / sigma;
            r.weights[c * grid.bands + b] = std::exp(-0.5 * z * z);
            sum += r.weights[c * grid.bands + b];
        }
        for (int b = 0; b < grid.bands; ++b) r.weights[c * grid.bands + b] /= sum;
    }
    return r;
}

SpectralResponse SpectralResponse::load_csv(const std::filesystem::path& path, const WavelengthGrid& grid) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open spectral response " + path.string());
    SpectralResponse r{grid, std::vector<double>(3u * grid.bands)};
    std::string line;
    int band = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        double nm = 0, rr = 0, gg = 0, bb = 0;
        if (!(fields >> nm >> rr >> gg >> bb)) throw std::runtime_error("malformed spectral response row: " + line);
        if (band >= grid.bands || grid.index_of(nm) != band) {
            throw std::runtime_error("spectral response rows must follow the cube grid");
        }
        r.weights[0 * grid.bands + band] = rr;
        r.weights[1 * grid.bands + band] = gg;
        r.weights[2 * grid.bands + band] = bb;
        ++band;
    }
    if (band != grid.bands) throw std::runtime_error("spectral response has " + std::to_string(band) + " rows, expected " + std::to_string(grid.bands));
    r.validate();
    return r;
}

std::size_t PixelMask::count(MaskCode code) const {
    return static_cast<std::size_t>(std::count(codes.begin(), codes.end(), code));
}

std::uint8_t mask_gray_level(MaskCode code) {
    switch (code) {
        case MaskCode::effective: return 255;
        case MaskCode::saturated: return 0;
        case MaskCode::low_cod: return 64;
        case MaskCode::non_tissue: return 128;
    }
    return 0;
}

namespace {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <class T>
T parse_number(const std::string& text, const std::string& key) {
    T v{};
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw std::runtime_error("malformed cube header value for '" + key + "': " + text);
    }
    return v;
}

}  // namespace

std::string encode_cube_header(const Hypercube& cube) {
    std::string h;
    h += "magic=OXC1\n";
    h += "width=" + std::to_string(cube.width) + "\n";
    h += "height=" + std::to_string(cube.height) + "\n";
    h += "bands=" + std::to_string(cube.grid.bands) + "\n";
    h += "start_nm=" + format_double(cube.grid.start_nm) + "\n";
    h += "step_nm=" + format_double(cube.grid.step_nm) + "\n";
    h += "\n";
    return h;
}

void save_cube(const Hypercube& cube, const std::filesystem::path& path) {
    if (cube.data.size() != cube.plane_size() * cube.grid.bands) throw std::invalid_argument("cube payload size does not match dimensions");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write cube to " + path.string());
    const std::string header = encode_cube_header(cube);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(cube.data.data()), static_cast<std::streamsize>(cube.data.size() * sizeof(float)));
    if (!out) throw std::runtime_error("failed writing cube to " + path.string());
}

Hypercube load_cube(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open cube " + path.string());

    std::map<std::string, std::string> fields;
    std::string line;
    bool terminated = false;
    while (std::getline(in, line)) {
        if (line.empty()) {
            terminated = true;
            break;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("malformed cube header line: " + line);
        fields[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (!terminated) throw std::runtime_error("cube header is not terminated by a blank line");
    if (fields["magic"] != "OXC1") throw std::runtime_error("not an OXC1 cube: " + path.string());
    for (const char* key : {"width", "height", "bands", "start_nm", "step_nm"}) {
        if (!fields.count(key)) throw std::runtime_error(std::string("cube header is missing '") + key + "'");
    }

    Hypercube cube;
    cube.width = parse_number<int>(fields["width"], "width");
    cube.height = parse_number<int>(fields["height"], "height");
    cube.grid.bands = parse_number<int>(fields["bands"], "bands");
    cube.grid.start_nm = parse_number<double>(fields["start_nm"], "start_nm");
    cube.grid.step_nm = parse_number<double>(fields["step_nm"], "step_nm");
    if (cube.width < 0 || cube.height < 0) throw std::runtime_error("negative cube dimensions in header");
    cube.grid.validate();

    const std::size_t expected = cube.plane_size() * cube.grid.bands;
    const auto payload_start = in.tellg();
    in.seekg(0, std::ios::end);
    const auto payload_bytes = static_cast<std::size_t>(in.tellg() - payload_start);
    if (payload_bytes != expected * sizeof(float)) {
        throw std::runtime_error("cube payload holds " + std::to_string(payload_bytes) + " bytes, header implies " +
                                 std::to_string(expected * sizeof(float)));
    }
    in.seekg(payload_start);
    cube.data.resize(expected);
    in.read(reinterpret_cast<char*>(cube.data.data()), static_cast<std::streamsize>(payload_bytes));
    if (!in) throw std::runtime_error("failed reading cube payload from " + path.string());
    return cube;
}

RgbImage synthesize_rgb(const Hypercube& cube, const SpectralResponse& response, Clamp clamp) {
    if (response.grid.bands != cube.grid.bands) {
        throw std::invalid_argument("spectral response has " + std::to_string(response.grid.bands) + " bands, cube has " +
                                    std::to_string(cube.grid.bands));
    }
    RgbImage rgb(cube.width, cube.height);
    const std::size_t n = cube.plane_size();
    const int bands = cube.grid.bands;
    double norm[3];
    for (int c = 0; c < 3; ++c) norm[c] = 1.0 / response.row_sum(c);

#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < static_cast<std::int64_t>(n); ++p) {
        double acc[3] = {0.0, 0.0, 0.0};
        bool saturated = false;
        for (int b = 0; b < bands; ++b) {
            const float v = cube.data[b * n + p];
            if (std::isnan(v)) {
                saturated = true;
                break;
            }
            for (int c = 0; c < 3; ++c) acc[c] += response.weight(c, b) * v;
        }
        for (int c = 0; c < 3; ++c) {
            float out = saturated ? std::numeric_limits<float>::quiet_NaN() : static_cast<float>(acc[c] * norm[c]);
            if (clamp == Clamp::yes && !saturated) out = std::clamp(out, 0.0f, 1.0f);
            rgb.data[c * n + p] = out;
        }
    }
    return rgb;
}

RgbImage extract_bands(const Hypercube& cube, std::span<const double> wavelengths_nm) {
    if (wavelengths_nm.size() != 3) throw std::invalid_argument("band preview needs exactly three wavelengths");
    RgbImage rgb(cube.width, cube.height);
    for (int c = 0; c < 3; ++c) {
        const int b = cube.grid.index_of(wavelengths_nm[c]);
        const auto src = cube.band(b);
        std::copy(src.begin(), src.end(), rgb.data.begin() + c * rgb.plane_size());
    }
    return rgb;
}

RgbImage extract_bands(const Hypercube& cube) {
    constexpr double defaults[3] = {460.0, 520.0, 590.0};
    return extract_bands(cube, defaults);
}

}  // namespace oxy
