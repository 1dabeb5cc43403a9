#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "oxy/config.hpp"

namespace oxy {

/// Phantom specs of one split of the desk-scale suite.
std::vector<PhantomSpec> suite_specs(const ExperimentConfig& cfg, Split split);

struct SuiteData {
    BundleSpec bundle;  // at suite scale
    FibreMask fibres;
    std::vector<Acquisition> train;
    std::vector<Acquisition> test;
};

/// Phantoms -> RGB, sparse spectra through `bundle` and regression ground truth.
SuiteData build_suite(const ExperimentConfig& cfg, const std::vector<Phantom>& train, const std::vector<Phantom>& test,
                      const BundleSpec& bundle);

/// Every crop of every training acquisition, materialised on demand.
gan::SampleSource crop_source(const std::vector<Acquisition>& acqs, const AugmentParams& params);

bool all_zero(const Raster& r);

struct AblationRun {
    int n_spot = 0;
    std::uint64_t seed = 0;
    gan::TrainResult train;
    EvalReport report;
    double mean_infer_ms = 0.0;
};

/// One Table-1-style row: a fibre preset summarised over seeds and test acquisitions.
struct AblationRow {
    int n_spot = 0;
    double r = 0.0;
    double d = 0.0;
    double gamma = 0.0;
    std::size_t spots = 0;
    bool shsi_all_zero = false;
    Summary ssim;
    Summary e_bar;
    Summary p_hap;
    std::vector<double> seed_mean_e_bar;  // per seed, in config order
    double mean_e_bar_over_seeds = 0.0;
    double mean_infer_ms = 0.0;
};

struct AblationReport {
    std::vector<AblationRun> runs;
    std::vector<AblationRow> rows;

    const AblationRow& row(int n_spot) const;
    nlohmann::json to_json() const;
    void save_json(const std::filesystem::path& path) const;
    /// n_spot,r,d,gamma,spots,ssim_mean,ssim_std,e_bar_mean,e_bar_std,p_hap_mean,p_hap_std,infer_ms
    void save_csv(const std::filesystem::path& path) const;
};

/// phantom -> rgb/shsi per preset -> train -> evaluate -> aggregate, for every
/// preset and seed of the config. Writes per-run artifacts under out_dir when
/// it is non-empty.
AblationReport run_ablation(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                            const std::function<void(const std::string&)>& log = {});

}  // namespace oxy
