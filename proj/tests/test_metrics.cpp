#include <cmath>
#include <fstream>
#include <random>

#include "oxy/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace oxy;

namespace {

StO2Map random_map(int w, int h, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    StO2Map m(w, h);
    for (float& v : m.values) v = static_cast<float>(u(rng));
    return m;
}

}  // namespace

TEST_CASE("SSIM of a map with itself is 1") {
    std::mt19937_64 rng(1);
    const StO2Map a = random_map(24, 20, rng);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("SSIM matches a brute-force windowed oracle on random 16x16 pairs") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const StO2Map a = random_map(16, 16, rng);
        StO2Map b = random_map(16, 16, rng);
        // make some pairs correlated so the comparison is not only near 0
        if (trial % 2)
            for (std::size_t i = 0; i < b.values.size(); ++i) b.values[i] = 0.7f * a.values[i] + 0.3f * b.values[i];
        const double got = ssim(a, b);
        const double ref = oracle::brute_ssim(a, b, 11, 1.5, 0.01, 0.03, 1.0);
        CHECK(std::abs(got - ref) <= 1e-8);
    }
    SsimParams p;
    p.window = 7;
    p.sigma = 1.0;
    const StO2Map a = random_map(16, 16, rng), b = random_map(16, 16, rng);
    CHECK(std::abs(ssim(a, b, p) - oracle::brute_ssim(a, b, 7, 1.0, 0.01, 0.03, 1.0)) <= 1e-8);
}

TEST_CASE("SSIM window is normalised and validated") {
    const auto w = SsimParams{}.gaussian_window();
    double s = 0.0;
    for (double v : w) s += v;
    CHECK(s == doctest::Approx(1.0));
    CHECK(w[5 * 11 + 5] > w[0]);
    CHECK_THROWS(SsimParams{10}.gaussian_window());
}

TEST_CASE("SSIM skips excluded centres and fills excluded neighbours") {
    std::mt19937_64 rng(3);
    // 13x13 with an 11x11 window: centres 5..7 in each axis
    StO2Map a = random_map(13, 13, rng);
    StO2Map b = a;
    for (int y = 5; y <= 7; ++y)
        for (int x = 5; x <= 7; ++x)
            if (!(x == 6 && y == 6)) a.mask.at(x, y) = MaskCode::low_cod;
    for (int x = 0; x < 13; ++x) {
        b.mask.at(x, 1) = MaskCode::saturated;
        b.values[13 + x] = 99.0f;  // excluded, replaced by the window mean
    }
    CHECK(ssim(a, b) == doctest::Approx(1.0));
    b.values[6 * 13 + 3] += 0.2f;  // an effective pixel does matter
    CHECK(ssim(a, b) < 0.999);
    StO2Map dead = a;
    for (auto& c : dead.mask.codes) c = MaskCode::non_tissue;
    CHECK_THROWS(ssim(dead, b));
    CHECK_THROWS(ssim(a, StO2Map(12, 13)));
}

TEST_CASE("mean prediction error and p_HAP on hand-computed masked cases") {
    StO2Map gt(4, 1), syn(4, 1);
    gt.values = {0.50f, 0.20f, 0.90f, 0.40f};
    syn.values = {0.55f, 0.30f, 0.10f, 0.40f};
    gt.mask.at(2, 0) = MaskCode::saturated;  // the 0.8 error is excluded
    // errors over effective pixels: 0.05, 0.10, 0.00
    CHECK(mean_prediction_error(syn, gt) == doctest::Approx(0.15 / 3).epsilon(1e-6));
    // 0.05 sits exactly on the boundary and counts as a hit
    CHECK(p_hap(syn, gt) == doctest::Approx(2.0 / 3.0));
    syn.values[0] = 0.5501f;
    CHECK(p_hap(syn, gt) == doctest::Approx(1.0 / 3.0));
    syn.mask.at(3, 0) = MaskCode::low_cod;  // exclusion in either map counts
    CHECK(mean_prediction_error(syn, gt) == doctest::Approx((0.0501 + 0.1) / 2).epsilon(1e-5));
    CHECK(p_hap(syn, gt) == doctest::Approx(0.0));
    for (auto& c : gt.mask.codes) c = MaskCode::non_tissue;
    CHECK_THROWS(mean_prediction_error(syn, gt));
    CHECK_THROWS(p_hap(syn, gt));
}

TEST_CASE("summaries use population std and linear quantiles") {
    const Summary s = summarize({4.0, 1.0, 3.0, 2.0});
    CHECK(s.mean == 2.5);
    CHECK(s.std == doctest::Approx(std::sqrt(1.25)));
    CHECK(s.q1 == 1.75);
    CHECK(s.median == 2.5);
    CHECK(s.q3 == 3.25);
    CHECK(s.iqr == 1.5);
    CHECK(s.min == 1.0);
    CHECK(s.max == 4.0);
    const Summary one = summarize({0.3});
    CHECK(one.std == 0.0);
    CHECK(one.median == 0.3);
    CHECK_THROWS(summarize({}));

    // against a sorted-sample quantile computed by hand for n = 7
    std::vector<double> v{0.9, 0.1, 0.5, 0.3, 0.7, 0.2, 0.8};
    const Summary q = summarize(v);
    // sorted: 0.1 0.2 0.3 0.5 0.7 0.8 0.9; q1 at position 1.5, q3 at 4.5
    CHECK(q.q1 == doctest::Approx(0.25));
    CHECK(q.median == doctest::Approx(0.5));
    CHECK(q.q3 == doctest::Approx(0.75));
}

TEST_CASE("aggregate and report files") {
    test::TempDir dir;
    std::vector<AcquisitionScore> rows{{"a", 0.5, 0.1, 0.4, 10}, {"b", 0.7, 0.3, 0.6, 20}};
    const EvalReport r = aggregate(rows);
    CHECK(r.ssim.mean == doctest::Approx(0.6));
    CHECK(r.e_bar.std == doctest::Approx(0.1));
    CHECK(r.p_hap.max == doctest::Approx(0.6));
    r.save_json(dir / "r.json");
    r.save_csv(dir / "r.csv");
    r.save_boxplot_csv(dir / "box.csv");
    std::ifstream in(dir / "box.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "metric,min,q1,median,q3,max,iqr");
    CHECK(r.to_json()["rows"].size() == 2);

    std::mt19937_64 rng(4);
    const StO2Map a = random_map(16, 16, rng);
    const AcquisitionScore s = score("x", a, a);
    CHECK(s.ssim == doctest::Approx(1.0));
    CHECK(s.e_bar == 0.0);
    CHECK(s.p_hap == 1.0);
    CHECK(s.n_effective == 256);
}
