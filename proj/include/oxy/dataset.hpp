#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "oxy/fibre.hpp"
#include "oxy/hypercube.hpp"
#include "oxy/oximetry.hpp"
#include "oxy/raster.hpp"

#include "json.hpp"

namespace oxy {

/// Smooth random field: value noise on a lattice of the given spacing,
/// bilinearly interpolated and mapped onto [lo, hi].
struct FieldSpec {
    double correlation_px = 32.0;
    double lo = 0.0;
    double hi = 1.0;
};

struct PhantomSpec {
    std::uint64_t seed = 1;
    int width = 256;
    int height = 192;
    FieldSpec sto2_field{40.0, 0.2, 0.95};
    FieldSpec thb_field{48.0, 0.008, 0.02};
    FieldSpec offset_field{64.0, 0.05, 0.2};
    int vessel_count = 4;
    int specular_count = 3;
    double noise_sigma = 0.0;  // absorbance units
    int animal_id = 1;

    void validate() const;
};

struct Phantom {
    Hypercube cube;
    StO2Map truth;  // exact field; specular discs flagged saturated
};

/// Deterministic in spec.seed. Reflectance is the forward Beer-Lambert model
/// with a flat white reference, plus optional Gaussian absorbance noise.
Phantom phantom(const PhantomSpec& spec, const ChromophoreTable& table = ChromophoreTable::builtin());

/// A co-registered acquisition at native resolution, ready for cropping.
struct Acquisition {
    std::string id;
    int animal_id = 0;
    Raster rgb;    // 3 channels
    Raster shsi;   // bands channels, painted fibre spectra
    Raster target; // 1 channel StO2
    PixelMask mask;

    int width() const { return rgb.width; }
    int height() const { return rgb.height; }
    void validate() const;
};

struct AcquisitionInputs {
    SpectralResponse response = SpectralResponse::gaussian_default();
    ChromophoreTable table = ChromophoreTable::builtin();
    std::vector<double> white_ref = flat_white_reference(WavelengthGrid{});
    double cod_threshold = kDefaultCodThreshold;
};

/// RGB simulation, sparse sampling through `fibres` and regression ground truth.
Acquisition build_acquisition(std::string id, int animal_id, const Hypercube& cube, const FibreMask& fibres,
                              const AcquisitionInputs& inputs = {});

/// Network-sized training or test example.
struct Sample {
    Raster rgb;
    Raster shsi;
    Raster target;
    PixelMask mask;
};

struct AugmentParams {
    int window = 96;
    int stride = 16;
    int out_size = 256;
};

enum class Variant { identity, hflip, vflip };
const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct CropSpec {
    std::size_t acquisition = 0;
    Variant variant = Variant::identity;
    int window_row = 0;
    int window_col = 0;
    Window window;
};

/// 3 * (floor((W - window) / stride) + 1) * (floor((H - window) / stride) + 1).
std::size_t augmentation_count(int width, int height, const AugmentParams& params = {});

/// Crops in (acquisition, variant, window row, window column) order.
std::vector<CropSpec> plan_augmentation(int width, int height, std::size_t acquisition, const AugmentParams& params = {});

/// crop -> flip -> resize; rasters bilinear, mask nearest-neighbour.
Sample materialize(const Acquisition& acq, const CropSpec& crop, const AugmentParams& params = {});

std::vector<Sample> augment(const Acquisition& acq, const AugmentParams& params = {});

Window central_window(int width, int height, int window = 96);
/// Central window resized to out_size.
Sample make_test(const Acquisition& acq, const AugmentParams& params = {});

void to_json(nlohmann::json& j, const FieldSpec& f);
void from_json(const nlohmann::json& j, FieldSpec& f);
void to_json(nlohmann::json& j, const PhantomSpec& s);
void from_json(const nlohmann::json& j, PhantomSpec& s);

enum class Split { train, test };

struct ManifestEntry {
    std::string id;
    int animal_id = 0;
    Split split = Split::train;
    std::string cube_path;   // relative to the manifest directory
    std::string truth_path;
    PhantomSpec phantom;
};

struct Manifest {
    AugmentParams augment;
    std::vector<ManifestEntry> acquisitions;
    std::vector<CropSpec> samples;  // training crops only

    std::size_t split_count(Split s) const;
    nlohmann::json to_json() const;
    static Manifest from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static Manifest load(const std::filesystem::path& path);
};

/// Assigns acquisition i to animal (i mod animals) + first_animal_id.
std::vector<int> assign_animals(int acquisitions, int animals, int first_animal_id);

}  // namespace oxy
