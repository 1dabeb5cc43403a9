#include "oxy/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "oxy/random.hpp"

namespace oxy {

void PhantomSpec::validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("phantom dimensions must be positive");
    if (!(sto2_field.lo >= 0.0 && sto2_field.hi <= 1.0 && sto2_field.lo <= sto2_field.hi)) {
        throw std::invalid_argument("StO2 field range must lie within [0, 1]");
    }
    if (!(thb_field.lo > 0.0 && thb_field.lo <= thb_field.hi)) throw std::invalid_argument("total haemoglobin range must be positive");
    for (const FieldSpec* f : {&sto2_field, &thb_field, &offset_field}) {
        if (!(f->correlation_px > 0.0)) throw std::invalid_argument("field correlation length must be > 0");
    }
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be >= 0");
    if (vessel_count < 0 || specular_count < 0) throw std::invalid_argument("negative feature count");
}

namespace {

std::vector<double> value_noise(int width, int height, const FieldSpec& f, Rng& rng) {
    const double step = f.correlation_px;
    const int nx = static_cast<int>(std::ceil(width / step)) + 2;
    const int ny = static_cast<int>(std::ceil(height / step)) + 2;
    std::vector<double> lattice(static_cast<std::size_t>(nx) * ny);
    for (double& v : lattice) v = rng.uniform();
    std::vector<double> field(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y) {
        const double gy = (y + 0.5) / step;
        const int iy = static_cast<int>(gy);
        const double ty = gy - iy;
        for (int x = 0; x < width; ++x) {
            const double gx = (x + 0.5) / step;
            const int ix = static_cast<int>(gx);
            const double tx = gx - ix;
            const double v00 = lattice[iy * nx + ix], v10 = lattice[iy * nx + ix + 1];
            const double v01 = lattice[(iy + 1) * nx + ix], v11 = lattice[(iy + 1) * nx + ix + 1];
            const double v = (v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty;
            field[y * static_cast<std::size_t>(width) + x] = f.lo + (f.hi - f.lo) * v;
        }
    }
    return field;
}

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
}

struct Disc {
    double x, y, r;
};

}  // namespace

Phantom phantom(const PhantomSpec& spec, const ChromophoreTable& table) {
    spec.validate();
    table.validate();
    Rng rng(spec.seed);
    const int w = spec.width, h = spec.height;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    const double scale = std::min(w, h) / 192.0;

    auto sto2 = value_noise(w, h, spec.sto2_field, rng);
    auto thb = value_noise(w, h, spec.thb_field, rng);
    const auto offset = value_noise(w, h, spec.offset_field, rng);

    // vessels: poorly oxygenated, blood-rich strokes with a linear falloff
    for (int v = 0; v < spec.vessel_count; ++v) {
        const double ax = rng.uniform(0, w), ay = rng.uniform(0, h);
        const double bx = rng.uniform(0, w), by = rng.uniform(0, h);
        const double half_width = rng.uniform(1.5, 3.5) * scale;
        const double vessel_sto2 = std::max(spec.sto2_field.lo, rng.uniform(0.25, 0.45));
        const double thb_gain = rng.uniform(1.4, 1.9);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double dist = segment_distance(x + 0.5, y + 0.5, ax, ay, bx, by);
                if (dist >= half_width) continue;
                const double a = 1.0 - dist / half_width;
                const std::size_t p = y * static_cast<std::size_t>(w) + x;
                sto2[p] = sto2[p] * (1 - a) + vessel_sto2 * a;
                thb[p] *= 1.0 + (thb_gain - 1.0) * a;
            }
        }
    }

    // non-overlapping specular discs fully inside the image
    std::vector<Disc> discs;
    for (int attempt = 0; static_cast<int>(discs.size()) < spec.specular_count; ++attempt) {
        if (attempt > 10000) throw std::runtime_error("cannot place the requested specular discs");
        const double r = rng.uniform(2.0, 5.0) * scale;
        const double x = rng.uniform(r + 1, w - r - 1), y = rng.uniform(r + 1, h - r - 1);
        if (x - r < 0 || y - r < 0 || x + r > w || y + r > h) continue;
        const bool clear = std::all_of(discs.begin(), discs.end(),
                                       [&](const Disc& o) { return std::hypot(o.x - x, o.y - y) > o.r + r + 2.0; });
        if (clear) discs.push_back({x, y, r});
    }

    Phantom out{Hypercube(w, h, table.grid), StO2Map(w, h)};
    const int bands = table.grid.bands;
    for (std::size_t p = 0; p < n; ++p) {
        const double px = static_cast<double>(p % w) + 0.5, py = static_cast<double>(p / w) + 0.5;
        bool specular = false;
        for (const Disc& dsc : discs) specular = specular || std::hypot(px - dsc.x, py - dsc.y) < dsc.r;
        out.truth.values[p] = static_cast<float>(sto2[p]);
        if (specular) {
            out.truth.mask.codes[p] = MaskCode::saturated;
            for (int b = 0; b < bands; ++b) out.cube.data[b * n + p] = std::numeric_limits<float>::quiet_NaN();
            continue;
        }
        const auto a = forward_spectrum(std::clamp(sto2[p], 0.0, 1.0), thb[p], offset[p], table);
        for (int b = 0; b < bands; ++b) {
            const double noisy = a[b] + (spec.noise_sigma > 0.0 ? spec.noise_sigma * rng.normal() : 0.0);
            out.cube.data[b * n + p] = static_cast<float>(std::pow(10.0, -noisy));
        }
    }
    return out;
}

void Acquisition::validate() const {
    const int w = rgb.width, h = rgb.height;
    const auto same = [&](const Raster& r) { return r.width == w && r.height == h; };
    if (rgb.channels != 3 || !same(shsi) || !same(target) || target.channels != 1 || mask.width != w || mask.height != h) {
        throw std::invalid_argument("acquisition rasters are not co-registered");
    }
}

Acquisition build_acquisition(std::string id, int animal_id, const Hypercube& cube, const FibreMask& fibres,
                              const AcquisitionInputs& inputs) {
    Acquisition acq;
    acq.id = std::move(id);
    acq.animal_id = animal_id;
    acq.rgb = to_raster(synthesize_rgb(cube, inputs.response));
    if (fibres.centres.empty()) {
        acq.shsi = Raster(cube.grid.bands, cube.width, cube.height, 0.0f);
    } else {
        acq.shsi = to_raster(apply_mask(cube, fibres));
    }
    const StO2Map map = estimate_sto2_map(cube, inputs.white_ref, inputs.table, inputs.cod_threshold);
    acq.target = Raster(1, cube.width, cube.height);
    acq.target.data = map.values;
    acq.mask = map.mask;
    return acq;
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::identity: return "identity";
        case Variant::hflip: return "hflip";
        case Variant::vflip: return "vflip";
    }
    return "?";
}

Variant parse_variant(const std::string& name) {
    if (name == "identity") return Variant::identity;
    if (name == "hflip") return Variant::hflip;
    if (name == "vflip") return Variant::vflip;
    throw std::invalid_argument("unknown augmentation variant '" + name + "'");
}

namespace {

void check_params(int width, int height, const AugmentParams& p) {
    if (p.window <= 0 || p.stride <= 0 || p.out_size <= 0) throw std::invalid_argument("augmentation parameters must be positive");
    if (width < p.window || height < p.window) {
        throw std::invalid_argument("image " + std::to_string(width) + "x" + std::to_string(height) + " is smaller than the " +
                                    std::to_string(p.window) + " px window");
    }
}

Flip to_flip(Variant v) {
    switch (v) {
        case Variant::identity: return Flip::none;
        case Variant::hflip: return Flip::horizontal;
        case Variant::vflip: return Flip::vertical;
    }
    return Flip::none;
}

Sample crop_sample(const Acquisition& acq, const Window& w, Flip f, int out_size) {
    Sample s;
    s.rgb = resize_bilinear(flip(crop(acq.rgb, w), f), out_size, out_size);
    s.shsi = resize_bilinear(flip(crop(acq.shsi, w), f), out_size, out_size);
    s.target = resize_bilinear(flip(crop(acq.target, w), f), out_size, out_size);
    s.mask = resize_nearest(flip(crop(acq.mask, w), f), out_size, out_size);
    return s;
}

}  // namespace

std::size_t augmentation_count(int width, int height, const AugmentParams& params) {
    check_params(width, height, params);
    const std::size_t cols = static_cast<std::size_t>((width - params.window) / params.stride + 1);
    const std::size_t rows = static_cast<std::size_t>((height - params.window) / params.stride + 1);
    return 3 * cols * rows;
}

std::vector<CropSpec> plan_augmentation(int width, int height, std::size_t acquisition, const AugmentParams& params) {
    check_params(width, height, params);
    const int cols = (width - params.window) / params.stride + 1;
    const int rows = (height - params.window) / params.stride + 1;
    std::vector<CropSpec> plan;
    plan.reserve(static_cast<std::size_t>(3 * rows * cols));
    for (Variant v : {Variant::identity, Variant::hflip, Variant::vflip}) {
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                plan.push_back({acquisition, v, r, c, {c * params.stride, r * params.stride, params.window}});
            }
        }
    }
    return plan;
}

Sample materialize(const Acquisition& acq, const CropSpec& crop, const AugmentParams& params) {
    acq.validate();
    check_params(acq.width(), acq.height(), params);
    return crop_sample(acq, crop.window, to_flip(crop.variant), params.out_size);
}

std::vector<Sample> augment(const Acquisition& acq, const AugmentParams& params) {
    std::vector<Sample> out;
    for (const CropSpec& c : plan_augmentation(acq.width(), acq.height(), 0, params)) out.push_back(materialize(acq, c, params));
    return out;
}

Window central_window(int width, int height, int window) {
    if (width < window || height < window) throw std::invalid_argument("image is smaller than the test window");
    return {(width - window) / 2, (height - window) / 2, window};
}

Sample make_test(const Acquisition& acq, const AugmentParams& params) {
    acq.validate();
    return crop_sample(acq, central_window(acq.width(), acq.height(), params.window), Flip::none, params.out_size);
}

void to_json(nlohmann::json& j, const FieldSpec& f) {
    j = {{"correlation_px", f.correlation_px}, {"lo", f.lo}, {"hi", f.hi}};
}

void from_json(const nlohmann::json& j, FieldSpec& f) {
    f.correlation_px = j.at("correlation_px").get<double>();
    f.lo = j.at("lo").get<double>();
    f.hi = j.at("hi").get<double>();
}

void to_json(nlohmann::json& j, const PhantomSpec& s) {
    j = {{"seed", s.seed},
         {"width", s.width},
         {"height", s.height},
         {"sto2_field", s.sto2_field},
         {"thb_field", s.thb_field},
         {"offset_field", s.offset_field},
         {"vessel_count", s.vessel_count},
         {"specular_count", s.specular_count},
         {"noise_sigma", s.noise_sigma},
         {"animal_id", s.animal_id}};
}

void from_json(const nlohmann::json& j, PhantomSpec& s) {
    s.seed = j.at("seed").get<std::uint64_t>();
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.sto2_field = j.at("sto2_field").get<FieldSpec>();
    s.thb_field = j.at("thb_field").get<FieldSpec>();
    s.offset_field = j.at("offset_field").get<FieldSpec>();
    s.vessel_count = j.at("vessel_count").get<int>();
    s.specular_count = j.at("specular_count").get<int>();
    s.noise_sigma = j.at("noise_sigma").get<double>();
    s.animal_id = j.at("animal_id").get<int>();
}

std::size_t Manifest::split_count(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(acquisitions.begin(), acquisitions.end(), [s](const ManifestEntry& e) { return e.split == s; }));
}

nlohmann::json Manifest::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["augment"] = {{"window", augment.window}, {"stride", augment.stride}, {"out_size", augment.out_size}};
    j["acquisitions"] = nlohmann::json::array();
    for (const auto& e : acquisitions) {
        j["acquisitions"].push_back({{"id", e.id},
                                     {"animal_id", e.animal_id},
                                     {"split", e.split == Split::train ? "train" : "test"},
                                     {"cube", e.cube_path},
                                     {"truth", e.truth_path},
                                     {"phantom", e.phantom}});
    }
    j["samples"] = nlohmann::json::array();
    for (const auto& s : samples) {
        const auto& src = acquisitions.at(s.acquisition);
        j["samples"].push_back({{"path", src.cube_path + "#" + variant_name(s.variant) + "/r" + std::to_string(s.window_row) +
                                             "/c" + std::to_string(s.window_col)},
                                {"acquisition", src.id},
                                {"animal_id", src.animal_id},
                                {"split", "train"},
                                {"variant", variant_name(s.variant)},
                                {"window_row", s.window_row},
                                {"window_col", s.window_col},
                                {"x", s.window.x},
                                {"y", s.window.y},
                                {"size", s.window.size}});
    }
    return j;
}

Manifest Manifest::from_json(const nlohmann::json& j) {
    if (j.value("version", 0) != 1) throw std::runtime_error("unsupported manifest version");
    Manifest m;
    m.augment.window = j.at("augment").at("window").get<int>();
    m.augment.stride = j.at("augment").at("stride").get<int>();
    m.augment.out_size = j.at("augment").at("out_size").get<int>();
    for (const auto& a : j.at("acquisitions")) {
        ManifestEntry e;
        e.id = a.at("id").get<std::string>();
        e.animal_id = a.at("animal_id").get<int>();
        const auto split = a.at("split").get<std::string>();
        if (split != "train" && split != "test") throw std::runtime_error("unknown split '" + split + "'");
        e.split = split == "train" ? Split::train : Split::test;
        e.cube_path = a.at("cube").get<std::string>();
        e.truth_path = a.value("truth", "");
        e.phantom = a.at("phantom").get<PhantomSpec>();
        m.acquisitions.push_back(std::move(e));
    }
    for (const auto& s : j.at("samples")) {
        const auto id = s.at("acquisition").get<std::string>();
        const auto it = std::find_if(m.acquisitions.begin(), m.acquisitions.end(), [&](const ManifestEntry& e) { return e.id == id; });
        if (it == m.acquisitions.end()) throw std::runtime_error("sample refers to unknown acquisition '" + id + "'");
        CropSpec c;
        c.acquisition = static_cast<std::size_t>(it - m.acquisitions.begin());
        c.variant = parse_variant(s.at("variant").get<std::string>());
        c.window_row = s.at("window_row").get<int>();
        c.window_col = s.at("window_col").get<int>();
        c.window = {s.at("x").get<int>(), s.at("y").get<int>(), s.at("size").get<int>()};
        m.samples.push_back(c);
    }
    return m;
}

void Manifest::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest " + path.string());
    out << to_json().dump(1) << '\n';
}

Manifest Manifest::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path.string());
    return from_json(nlohmann::json::parse(in));
}

std::vector<int> assign_animals(int acquisitions, int animals, int first_animal_id) {
    if (animals <= 0) throw std::invalid_argument("need at least one animal");
    std::vector<int> ids(acquisitions);
    for (int i = 0; i < acquisitions; ++i) ids[i] = first_animal_id + i % animals;
    return ids;
}

}  // namespace oxy
