#pragma once

// reference computations shared by the unit tests and the acceptance binary

#include <cmath>
#include <cstddef>
#include <vector>

#include "oxy/oximetry.hpp"

namespace oracle {

using oxy::StO2Map;

// windowed SSIM written out per window from the definition, Gaussian weights
// computed here rather than taken from SsimParams
inline double brute_ssim(const StO2Map& a, const StO2Map& b, int win, double sigma, double k1, double k2, double L) {
    const int half = win / 2;
    std::vector<double> g;
    double gs = 0.0;
    for (int y = -half; y <= half; ++y)
        for (int x = -half; x <= half; ++x) {
            g.push_back(std::exp(-(x * x + y * y) / (2 * sigma * sigma)));
            gs += g.back();
        }
    for (double& v : g) v /= gs;
    const double c1 = (k1 * L) * (k1 * L), c2 = (k2 * L) * (k2 * L);
    double total = 0.0;
    int n = 0;
    for (int cy = half; cy + half < a.height; ++cy) {
        for (int cx = half; cx + half < a.width; ++cx) {
            double ma = 0, mb = 0;
            int k = 0;
            for (int y = -half; y <= half; ++y)
                for (int x = -half; x <= half; ++x, ++k) {
                    ma += g[k] * a.at(cx + x, cy + y);
                    mb += g[k] * b.at(cx + x, cy + y);
                }
            double va = 0, vb = 0, cov = 0;
            k = 0;
            for (int y = -half; y <= half; ++y)
                for (int x = -half; x <= half; ++x, ++k) {
                    const double da = a.at(cx + x, cy + y) - ma, db = b.at(cx + x, cy + y) - mb;
                    va += g[k] * da * da;
                    vb += g[k] * db * db;
                    cov += g[k] * da * db;
                }
            total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++n;
        }
    }
    return total / n;
}

// lattice centres within radius R of the image centre, enumerated directly
// from the row/column definition
inline std::size_t lattice_count_within(int w, int h, double d, double R) {
    const double cx = w / 2.0, cy = h / 2.0, pitch = d * std::sqrt(3.0) / 2.0;
    std::size_t n = 0;
    for (int j = -200; j <= 200; ++j) {
        for (int i = -200; i <= 200; ++i) {
            const double x = cx + i * d + ((j % 2 != 0) ? d / 2 : 0.0);
            const double y = cy + j * pitch;
            if (x < 0 || x > w || y < 0 || y > h) continue;
            if (std::hypot(x - cx, y - cy) <= R + 1e-9) ++n;
        }
    }
    return n;
}

// modified Beer-Lambert attenuation per band, from the table values directly
inline std::vector<double> attenuation(double s, double thb, double off, const oxy::ChromophoreTable& t) {
    std::vector<double> a(t.grid.bands);
    for (int b = 0; b < t.grid.bands; ++b) a[b] = thb * (s * t.eps_hbo2[b] + (1 - s) * t.eps_hb[b]) + off;
    return a;
}

}  // namespace oracle
