#include "oxy/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace oxy {

std::vector<double> SsimParams::gaussian_window() const {
    if (window < 1 || window % 2 == 0 || !(sigma > 0)) throw std::invalid_argument("SSIM window must be odd with sigma > 0");
    const int half = window / 2;
    std::vector<double> w(static_cast<std::size_t>(window) * window);
    double sum = 0.0;
    for (int y = 0; y < window; ++y) {
        for (int x = 0; x < window; ++x) {
            const double dy = y - half, dx = x - half;
            w[y * window + x] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            sum += w[y * window + x];
        }
    }
    for (double& v : w) v /= sum;
    return w;
}

namespace {

void check_same_dims(const StO2Map& a, const StO2Map& b) {
    if (a.width != b.width || a.height != b.height) throw std::invalid_argument("StO2 maps differ in size");
}

bool jointly_effective(const StO2Map& a, const StO2Map& b, std::size_t p) {
    return a.mask.codes[p] == MaskCode::effective && b.mask.codes[p] == MaskCode::effective;
}

}  // namespace

double ssim(const StO2Map& a, const StO2Map& b, const SsimParams& params) {
    check_same_dims(a, b);
    const auto g = params.gaussian_window();
    const int win = params.window, half = win / 2;
    const int w = a.width, h = a.height;
    const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
    const double c2 = std::pow(params.k2 * params.dynamic_range, 2);

    double total = 0.0;
    long count = 0;
#pragma omp parallel for reduction(+ : total, count) schedule(static)
    for (int cy = half; cy < h - half; ++cy) {
        std::vector<double> va(static_cast<std::size_t>(win) * win), vb(va.size());
        for (int cx = half; cx < w - half; ++cx) {
            if (!jointly_effective(a, b, cy * static_cast<std::size_t>(w) + cx)) continue;
            double fill_a = 0.0, fill_b = 0.0;
            int n_eff = 0;
            for (int y = 0; y < win; ++y) {
                for (int x = 0; x < win; ++x) {
                    const std::size_t p = (cy - half + y) * static_cast<std::size_t>(w) + (cx - half + x);
                    const bool eff = jointly_effective(a, b, p);
                    va[y * win + x] = eff ? a.values[p] : std::nan("");
                    vb[y * win + x] = eff ? b.values[p] : std::nan("");
                    if (eff) {
                        fill_a += a.values[p];
                        fill_b += b.values[p];
                        ++n_eff;
                    }
                }
            }
            fill_a /= n_eff;
            fill_b /= n_eff;
            double mu_a = 0, mu_b = 0;
            for (std::size_t k = 0; k < va.size(); ++k) {
                if (std::isnan(va[k])) {
                    va[k] = fill_a;
                    vb[k] = fill_b;
                }
                mu_a += g[k] * va[k];
                mu_b += g[k] * vb[k];
            }
            double var_a = 0, var_b = 0, cov = 0;
            for (std::size_t k = 0; k < va.size(); ++k) {
                const double da = va[k] - mu_a, db = vb[k] - mu_b;
                var_a += g[k] * da * da;
                var_b += g[k] * db * db;
                cov += g[k] * da * db;
            }
            total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("no SSIM window has an effective centre pixel");
    return total / static_cast<double>(count);
}

double mean_prediction_error(const StO2Map& syn, const StO2Map& gt) {
    check_same_dims(syn, gt);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < gt.values.size(); ++p) {
        if (!jointly_effective(syn, gt, p)) continue;
        sum += std::abs(static_cast<double>(syn.values[p]) - gt.values[p]);
        ++n;
    }
    if (n == 0) throw std::invalid_argument("no effective pixels to score");
    return sum / static_cast<double>(n);
}

double p_hap(const StO2Map& syn, const StO2Map& gt, double threshold) {
    check_same_dims(syn, gt);
    constexpr double slack = 1e-6;
    std::size_t hits = 0, n = 0;
    for (std::size_t p = 0; p < gt.values.size(); ++p) {
        if (!jointly_effective(syn, gt, p)) continue;
        const double e = std::abs(static_cast<double>(syn.values[p]) - gt.values[p]);
        if (1.0 - e >= threshold - slack) ++hits;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("no effective pixels to score");
    return static_cast<double>(hits) / static_cast<double>(n);
}

AcquisitionScore score(std::string id, const StO2Map& syn, const StO2Map& gt, const SsimParams& params) {
    AcquisitionScore s;
    s.id = std::move(id);
    s.ssim = ssim(syn, gt, params);
    s.e_bar = mean_prediction_error(syn, gt);
    s.p_hap = p_hap(syn, gt);
    for (std::size_t p = 0; p < gt.values.size(); ++p) s.n_effective += jointly_effective(syn, gt, p);
    return s;
}

Summary summarize(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("cannot summarise an empty sample");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    Summary s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / n);
    const auto quantile = [&](double q) {
        const double pos = q * (n - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (pos - lo) * (values[hi] - values[lo]);
    };
    s.q1 = quantile(0.25);
    s.median = quantile(0.5);
    s.q3 = quantile(0.75);
    s.iqr = s.q3 - s.q1;
    s.min = values.front();
    s.max = values.back();
    return s;
}

EvalReport aggregate(const std::vector<AcquisitionScore>& rows) {
    if (rows.empty()) throw std::invalid_argument("cannot aggregate an empty report list");
    EvalReport r;
    r.rows = rows;
    std::vector<double> s, e, p;
    for (const auto& row : rows) {
        s.push_back(row.ssim);
        e.push_back(row.e_bar);
        p.push_back(row.p_hap);
    }
    r.ssim = summarize(s);
    r.e_bar = summarize(e);
    r.p_hap = summarize(p);
    return r;
}

namespace {

nlohmann::json summary_json(const Summary& s) {
    return {{"mean", s.mean}, {"std", s.std}, {"q1", s.q1}, {"median", s.median},
            {"q3", s.q3},     {"iqr", s.iqr}, {"min", s.min}, {"max", s.max}};
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows) {
        j["rows"].push_back({{"id", r.id}, {"ssim", r.ssim}, {"e_bar", r.e_bar}, {"p_hap", r.p_hap}, {"n_effective", r.n_effective}});
    }
    j["aggregate"] = {{"ssim", summary_json(ssim)}, {"e_bar", summary_json(e_bar)}, {"p_hap", summary_json(p_hap)}};
    return j;
}

void EvalReport::save_json(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_json().dump(2) << '\n';
}

void EvalReport::save_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(10);
    out << "id,ssim,e_bar,p_hap,n_effective\n";
    for (const auto& r : rows) out << r.id << ',' << r.ssim << ',' << r.e_bar << ',' << r.p_hap << ',' << r.n_effective << '\n';
}

void EvalReport::save_boxplot_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(10);
    out << "metric,min,q1,median,q3,max,iqr\n";
    const std::pair<const char*, const Summary*> metrics[] = {{"ssim", &ssim}, {"e_bar", &e_bar}, {"p_hap", &p_hap}};
    for (const auto& [name, s] : metrics) {
        out << name << ',' << s->min << ',' << s->q1 << ',' << s->median << ',' << s->q3 << ',' << s->max << ',' << s->iqr << '\n';
    }
}

}  // namespace oxy
