#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "oxy/oximetry.hpp"

#include "json.hpp"

namespace oxy {

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;

    /// Normalised Gaussian window, row-major window x window.
    std::vector<double> gaussian_window() const;
};

/// Mean local SSIM over valid windows whose centre pixel is effective in
/// both maps. Inside a window, excluded pixels are replaced by the mean of
/// the window's effective pixels before the statistics are taken.
double ssim(const StO2Map& a, const StO2Map& b, const SsimParams& params = {});

/// Sum |syn - gt| over pixels effective in both maps, divided by their count.
double mean_prediction_error(const StO2Map& syn, const StO2Map& gt);

/// Fraction of jointly effective pixels with 1 - |e| >= threshold.
/// The comparison allows 1e-6 slack so float-stored maps keep the boundary inclusive.
double p_hap(const StO2Map& syn, const StO2Map& gt, double threshold = 0.95);

struct AcquisitionScore {
    std::string id;
    double ssim = 0.0;
    double e_bar = 0.0;
    double p_hap = 0.0;
    std::size_t n_effective = 0;
};

AcquisitionScore score(std::string id, const StO2Map& syn, const StO2Map& gt, const SsimParams& params = {});

struct Summary {
    double mean = 0.0;
    double std = 0.0;  // population
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double iqr = 0.0;
    double min = 0.0;
    double max = 0.0;
};

/// Linear-interpolation quantiles over the sorted sample.
Summary summarize(std::vector<double> values);

struct EvalReport {
    std::vector<AcquisitionScore> rows;
    Summary ssim;
    Summary e_bar;
    Summary p_hap;

    nlohmann::json to_json() const;
    void save_json(const std::filesystem::path& path) const;
    void save_csv(const std::filesystem::path& path) const;
    /// metric,min,q1,median,q3,max,iqr
    void save_boxplot_csv(const std::filesystem::path& path) const;
};

EvalReport aggregate(const std::vector<AcquisitionScore>& rows);

}  // namespace oxy
