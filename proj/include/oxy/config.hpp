#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "oxy/dataset.hpp"
#include "oxy/fibre.hpp"
#include "oxy/gan/trainer.hpp"
#include "oxy/metrics.hpp"

#include "json.hpp"

namespace oxy {

/// Phantom population for the desk-scale experiments. Acquisition i of a
/// split uses phantom seed mix_seed(seed, split tag + i).
struct SuiteSpec {
    int train_acquisitions = 12;
    int train_animals = 4;
    int test_acquisitions = 4;
    int test_animals = 2;
    int width = 128;
    int height = 96;

    void validate() const;
    /// Ratio of this suite's height to the 192-pixel reference frame, used to
    /// scale fibre geometry and crop windows.
    double scale() const { return height / 192.0; }
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string output_dir = "out";

    double cod_threshold = kDefaultCodThreshold;
    PhantomSpec phantom;
    int phantom_count = 38;  // acquisitions for the augment command
    SuiteSpec suite;
    int n_spot = 300;                       // bundle preset for single-run commands
    std::optional<BundleSpec> custom_bundle; // set when the file gives r and d explicitly
    AugmentParams augment;
    AugmentParams desk_augment{48, 8, 64};  // crops for the desk-scale ablation
    std::int64_t desk_steps = 300;          // training steps per ablation run
    gan::TrainConfig train;
    SsimParams ssim;
    double hap_threshold = 0.95;
    std::vector<int> presets{0, 121, 171, 300};
    std::vector<std::uint64_t> seeds{1, 2, 3};

    void validate() const;
    void set_seed(std::uint64_t s);
    BundleSpec bundle() const;
    nlohmann::json to_json() const;
    /// FNV-1a of the canonical JSON form.
    std::string hash() const;
};

/// Defaults overridden by the TOML document; unknown keys are errors.
ExperimentConfig parse_config(const std::string& toml_text, const std::string& origin = "<string>");
ExperimentConfig load_config(const std::filesystem::path& path);
/// The defaults written out as a commented TOML file.
std::string default_config_toml();

std::uint64_t fnv1a64(const std::string& bytes);

namespace gan {
void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);
void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);
void to_json(nlohmann::json& j, const LossWeights& w);
void to_json(nlohmann::json& j, const TrainConfig& c);
}  // namespace gan

namespace nn {
void to_json(nlohmann::json& j, const AdamConfig& c);
}

}  // namespace oxy
