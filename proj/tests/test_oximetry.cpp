#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "oxy/dataset.hpp"
#include "oxy/oximetry.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace oxy;

namespace {

// independent least squares: normal equations solved with Cramer's rule
struct OracleFit {
    double hbo2, hb, offset, r2;
};

double det3(const std::array<std::array<double, 3>, 3>& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

OracleFit oracle_fit(const std::vector<double>& a, const ChromophoreTable& t) {
    const std::size_t n = a.size();
    std::array<std::array<double, 3>, 3> ata{};
    std::array<double, 3> atb{};
    for (std::size_t b = 0; b < n; ++b) {
        const double row[3] = {t.eps_hbo2[b], t.eps_hb[b], 1.0};
        for (int i = 0; i < 3; ++i) {
            atb[i] += row[i] * a[b];
            for (int j = 0; j < 3; ++j) ata[i][j] += row[i] * row[j];
        }
    }
    const double d = det3(ata);
    double x[3];
    for (int k = 0; k < 3; ++k) {
        auto m = ata;
        for (int i = 0; i < 3; ++i) m[i][k] = atb[i];
        x[k] = det3(m) / d;
    }
    double mean = 0.0;
    for (double v : a) mean += v;
    mean /= static_cast<double>(n);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        const double pred = x[0] * t.eps_hbo2[b] + x[1] * t.eps_hb[b] + x[2];
        ss_res += (a[b] - pred) * (a[b] - pred);
        ss_tot += (a[b] - mean) * (a[b] - mean);
    }
    return {x[0], x[1], x[2], 1.0 - ss_res / ss_tot};
}

}  // namespace

TEST_CASE("builtin table matches the shipped csv") {
    const auto builtin = ChromophoreTable::builtin();
    const auto csv = ChromophoreTable::load_csv(std::string(OXY_ASSET_DIR) + "/extinction_hb_v1.csv");
    CHECK(builtin.grid == WavelengthGrid{});
    REQUIRE(csv.eps_hb.size() == builtin.eps_hb.size());
    for (int b = 0; b < builtin.grid.bands; ++b) {
        CHECK(csv.eps_hbo2[b] == doctest::Approx(builtin.eps_hbo2[b]));
        CHECK(csv.eps_hb[b] == doctest::Approx(builtin.eps_hb[b]));
        CHECK(builtin.eps_hbo2[b] > 0.0);
        CHECK(builtin.eps_hb[b] > 0.0);
    }
    // deoxy dominates in the red and at 560 nm
    const int b560 = builtin.grid.index_of(560.0);
    const int b660 = builtin.grid.index_of(660.0);
    CHECK(builtin.eps_hb[b660] > 3 * builtin.eps_hbo2[b660]);
    CHECK(builtin.eps_hb[b560] > builtin.eps_hbo2[b560]);
}

TEST_CASE("table parsing rejects bad input") {
    CHECK_THROWS(ChromophoreTable::parse_csv("wavelength_nm,hbo2,hb\n460,1\n"));
    CHECK_THROWS(ChromophoreTable::parse_csv("wavelength_nm,hbo2,hb\n460,1,2\n470,1,2\n490,1,2\n"));
    CHECK_THROWS(ChromophoreTable::parse_csv("wavelength_nm,hbo2,hb\n460,-1,2\n470,1,2\n480,1,2\n"));
    const auto t = ChromophoreTable::parse_csv("wavelength_nm,hbo2,hb\n500,1,2\n510,3,4\n520,5,7\n");
    CHECK(t.grid.start_nm == 500.0);
    CHECK(t.grid.bands == 3);
    const auto sub = ChromophoreTable::builtin().resampled_to(WavelengthGrid{500, 20, 5});
    CHECK(sub.eps_hb[1] == ChromophoreTable::builtin().eps_hb[6]);
    CHECK_THROWS(ChromophoreTable::builtin().resampled_to(WavelengthGrid{455, 10, 3}));
}

TEST_CASE("noiseless round trip over the StO2 ladder") {
    const auto t = ChromophoreTable::builtin();
    const BeerLambertFitter fitter(t);
    const auto white = flat_white_reference(t.grid);
    for (int k = 0; k <= 10; ++k) {
        const double s = k / 10.0;
        for (double thb : {0.005, 0.02}) {
            for (double off : {0.0, 0.15}) {
                const auto a = forward_spectrum(s, thb, off, t);
                const auto i = reflectance_from_attenuation(a, white);
                const auto fit = fitter.fit(i, white);
                CHECK(std::abs(fit.sto2() - s) <= 1e-6);
                CHECK(fit.cod > 0.999999);
                CHECK(fit.c_hbo2 + fit.c_hb == doctest::Approx(thb).epsilon(1e-6));
                CHECK(fit.offset == doctest::Approx(off).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("fit agrees with an independent normal-equations solver") {
    const auto t = ChromophoreTable::builtin();
    const BeerLambertFitter fitter(t);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (int trial = 0; trial < 200; ++trial) {
        auto a = oracle::attenuation(u(rng), 0.005 + 0.02 * u(rng), 0.2 * u(rng), t);
        for (double& v : a) v += noise(rng);
        const auto fit = fitter.fit_attenuation(a);
        const auto ref = oracle_fit(a, t);
        CHECK(fit.c_hbo2 == doctest::Approx(std::max(ref.hbo2, 0.0)).epsilon(1e-8).scale(1e-3));
        CHECK(fit.c_hb == doctest::Approx(std::max(ref.hb, 0.0)).epsilon(1e-8).scale(1e-3));
        CHECK(fit.offset == doctest::Approx(ref.offset).epsilon(1e-8).scale(1.0));
        CHECK(fit.cod == doctest::Approx(std::clamp(ref.r2, 0.0, 1.0)).epsilon(1e-9));
    }
}

TEST_CASE("noisy Monte-Carlo: 95th percentile error within 0.02") {
    const auto t = ChromophoreTable::builtin();
    const BeerLambertFitter fitter(t);
    std::mt19937_64 rng(20240501);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.005);
    std::vector<double> errors;
    for (int p = 0; p < 1000; ++p) {
        const double s = u(rng);
        auto a = oracle::attenuation(s, 0.008 + 0.012 * u(rng), 0.05 + 0.15 * u(rng), t);
        for (double& v : a) v += noise(rng);
        const auto fit = fitter.fit_attenuation(a);
        REQUIRE(fit.sto2_defined());
        errors.push_back(std::abs(fit.sto2() - s));
    }
    std::sort(errors.begin(), errors.end());
    const double p95 = errors[static_cast<std::size_t>(std::ceil(0.95 * errors.size())) - 1];
    MESSAGE("p95 StO2 error " << p95);
    CHECK(p95 <= 0.02);
}

TEST_CASE("fit input validation") {
    const auto t = ChromophoreTable::builtin();
    const BeerLambertFitter fitter(t);
    const auto white = flat_white_reference(t.grid);
    std::vector<double> i(24, 0.5);
    i[3] = 0.0;
    CHECK_THROWS_AS(fitter.fit(i, white), std::invalid_argument);
    i[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(fitter.fit(i, white), std::invalid_argument);
    CHECK_THROWS_AS(fitter.fit(std::vector<double>(10, 0.5), white), std::invalid_argument);
    CHECK_THROWS(forward_spectrum(1.2, 0.01, 0.0, t));
    CHECK_THROWS(forward_spectrum(0.5, 0.0, 0.0, t));
}

TEST_CASE("map estimation assigns exclusion codes") {
    const auto t = ChromophoreTable::builtin();
    const auto white = flat_white_reference(t.grid);
    Hypercube c(4, 1, t.grid);
    auto put = [&](int x, const std::vector<double>& a) {
        const auto r = reflectance_from_attenuation(a, white);
        for (int b = 0; b < 24; ++b) c.at(x, 0, b) = static_cast<float>(r[b]);
    };
    put(0, oracle::attenuation(0.7, 0.01, 0.1, t));
    put(1, oracle::attenuation(0.7, 0.01, 0.1, t));
    c.at(1, 0, 5) = std::numeric_limits<float>::quiet_NaN();
    // a spectrum the model cannot explain: alternating attenuation
    std::vector<double> zig(24);
    for (int b = 0; b < 24; ++b) zig[b] = (b % 2) ? 0.9 : 0.1;
    put(2, zig);
    for (int b = 0; b < 24; ++b) c.at(3, 0, b) = 1.0f;  // flat: no haemoglobin
    const StO2Map m = estimate_sto2_map(c, white, t);
    CHECK(m.mask.at(0, 0) == MaskCode::effective);
    CHECK(m.at(0, 0) == doctest::Approx(0.7).epsilon(1e-5));
    CHECK(m.mask.at(1, 0) == MaskCode::saturated);
    CHECK(m.mask.at(2, 0) == MaskCode::low_cod);
    CHECK(m.mask.at(3, 0) == MaskCode::non_tissue);
    for (int x = 1; x < 4; ++x) CHECK(m.at(x, 0) == 0.0f);

    const auto oracle = oracle_fit(zig, t);
    CHECK(oracle.r2 <= kDefaultCodThreshold);
}

TEST_CASE("noiseless phantom: regression recovers the truth field") {
    PhantomSpec spec;
    spec.width = 48;
    spec.height = 40;
    spec.seed = 5;
    const Phantom p = phantom(spec);
    const StO2Map est = estimate_sto2_map(p.cube, flat_white_reference(p.cube.grid), ChromophoreTable::builtin());
    std::size_t compared = 0;
    for (std::size_t i = 0; i < est.values.size(); ++i) {
        if (p.truth.mask.codes[i] == MaskCode::saturated) {
            CHECK(est.mask.codes[i] == MaskCode::saturated);
            continue;
        }
        REQUIRE(est.mask.codes[i] == MaskCode::effective);
        CHECK(std::abs(est.values[i] - p.truth.values[i]) < 1e-4);
        ++compared;
    }
    CHECK(compared > est.values.size() / 2);
}

TEST_CASE("map container round trip") {
    test::TempDir dir;
    StO2Map m(3, 2);
    m.at(1, 1) = 0.625f;
    m.mask.at(2, 0) = MaskCode::low_cod;
    m.mask.at(0, 1) = MaskCode::saturated;
    save_sto2_map(m, dir / "m.map");
    const StO2Map back = load_sto2_map(dir / "m.map");
    CHECK(back.values == m.values);
    CHECK(back.mask == m.mask);
    Hypercube three(2, 2, WavelengthGrid{0, 1, 3});
    save_cube(three, dir / "bad.map");
    CHECK_THROWS(load_sto2_map(dir / "bad.map"));
}

TEST_CASE("white reference csv") {
    test::TempDir dir;
    {
        std::ofstream os(dir / "w.csv");
        os << "wavelength_nm,value\n";
        for (int b = 0; b < 24; ++b) os << 460 + 10 * b << "," << 0.5 + 0.01 * b << "\n";
    }
    const auto w = load_white_reference_csv(dir / "w.csv", WavelengthGrid{});
    CHECK(w[10] == doctest::Approx(0.6));
    {
        std::ofstream os(dir / "partial.csv");
        os << "460,1\n470,1\n";
    }
    CHECK_THROWS(load_white_reference_csv(dir / "partial.csv", WavelengthGrid{}));
}
