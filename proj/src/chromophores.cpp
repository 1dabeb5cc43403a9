#include "oxy/oximetry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace oxy {

namespace {

// Mirror of assets/extinction_hb_v1.csv; test_oximetry checks they agree.
constexpr std::string_view kBuiltinTable = R"csv(# Molar extinction coefficients of oxy- and deoxy-haemoglobin, L mmol^-1 cm^-1.
# Values from the widely used compilation of Prahl (cm^-1/M, divided by 1000).
# version: 1
wavelength_nm,eps_hbo2,eps_hb
460,44.4800,23.3888
470,33.2092,16.1564
480,26.6292,14.5500
490,23.6844,16.6840
500,20.9328,20.0352
510,20.0352,25.7736
520,24.2024,31.5896
530,39.9568,39.0364
540,53.2360,46.5920
550,43.0160,53.4120
560,32.6132,53.7880
570,44.4960,45.0720
580,50.1040,37.0200
590,14.4008,28.3244
600,3.2000,14.6772
610,1.5060,9.4436
620,0.9420,6.5096
630,0.6100,5.1488
640,0.4420,4.3452
650,0.3680,3.7501
660,0.3196,3.2266
670,0.2940,2.7951
680,0.2776,2.4079
690,0.2760,2.1588
)csv";

}  // namespace

void ChromophoreTable::validate() const {
    grid.validate();
    if (eps_hbo2.size() != static_cast<std::size_t>(grid.bands) || eps_hb.size() != static_cast<std::size_t>(grid.bands)) {
        throw std::invalid_argument("chromophore table does not cover the grid");
    }
    for (int b = 0; b < grid.bands; ++b) {
        if (!(eps_hbo2[b] > 0.0) || !(eps_hb[b] > 0.0)) throw std::invalid_argument("extinction coefficients must be > 0");
    }
}

ChromophoreTable ChromophoreTable::builtin() { return parse_csv(kBuiltinTable); }

ChromophoreTable ChromophoreTable::load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open chromophore table " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

ChromophoreTable ChromophoreTable::parse_csv(std::string_view text) {
    std::vector<double> nm, oxy, deoxy;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        double w = 0, a = 0, b = 0;
        if (!(fields >> w >> a >> b)) throw std::runtime_error("malformed chromophore row: " + line);
        nm.push_back(w);
        oxy.push_back(a);
        deoxy.push_back(b);
    }
    if (nm.size() < 2) throw std::runtime_error("chromophore table needs at least two rows");
    ChromophoreTable t;
    t.grid.start_nm = nm.front();
    t.grid.step_nm = nm[1] - nm[0];
    t.grid.bands = static_cast<int>(nm.size());
    for (std::size_t i = 0; i < nm.size(); ++i) {
        if (std::abs(nm[i] - t.grid.wavelength(static_cast<int>(i))) > 1e-9) {
            throw std::runtime_error("chromophore table wavelengths must be uniformly spaced");
        }
    }
    t.eps_hbo2 = std::move(oxy);
    t.eps_hb = std::move(deoxy);
    t.validate();
    return t;
}

ChromophoreTable ChromophoreTable::resampled_to(const WavelengthGrid& target) const {
    ChromophoreTable t;
    t.grid = target;
    for (int b = 0; b < target.bands; ++b) {
        const int src = grid.index_of(target.wavelength(b));
        t.eps_hbo2.push_back(eps_hbo2[src]);
        t.eps_hb.push_back(eps_hb[src]);
    }
    t.validate();
    return t;
}

}  // namespace oxy
