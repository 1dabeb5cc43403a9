// Prints one PASS/FAIL line per acceptance criterion; exits nonzero on any FAIL.
// Optional arguments select criteria by number, e.g. `acceptance 1 2 8`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "oxy/dataset.hpp"
#include "oxy/gan/gradcheck.hpp"
#include "oxy/gan/trainer.hpp"
#include "oxy/metrics.hpp"
#include "oxy/pipeline.hpp"
#include "oxy/random.hpp"

using namespace oxy;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void augmentation(Outcome& o) {
    const AugmentParams p;
    std::size_t total = 0;
    for (std::size_t a = 0; a < 38; ++a) total += plan_augmentation(256, 192, a, p).size();
    const std::size_t per = augmentation_count(256, 192, p);
    o.detail << "38 x " << per << " = " << total << " samples";
    o.require(per == 231, "231 per acquisition");
    o.require(total == 8778, "8778 in total");
}

void fibre_geometry(Outcome& o) {
    for (int n : {121, 171, 300}) {
        const BundleSpec b = BundleSpec::preset(n);
        const FibreMask m = generate_mask(b, 256, 192);
        const std::size_t enumerated = oracle::lattice_count_within(256, 192, b.d, 96.0);
        const double rel = (static_cast<double>(m.untrimmed_count) - n) / n;
        char buf[160];
        std::snprintf(buf, sizeof buf, "n=%d: kept %zu, untrimmed %zu (%+.1f%%%s)%s", n, m.size(), m.untrimmed_count,
                      100 * rel, rel < 0 ? ", topped up" : "", n == 300 ? "" : "; ");
        o.detail << buf;
        o.require(m.size() == static_cast<std::size_t>(n), "trimmed count " + std::to_string(n));
        o.require(m.untrimmed_count == enumerated, "untrimmed count matches lattice enumeration");
        o.require(std::abs(rel) <= 0.15, "untrimmed within 15% for " + std::to_string(n));
    }
    o.require(BundleSpec::preset(121).gamma() == 0.25 && BundleSpec::preset(171).gamma() == 0.25, "gamma 0.25");
    o.detail << "; gamma 0.25/0.25. With a lattice point on the image centre, 171 has 163 in-circle centres, "
                "so an above-target-only reading of the 15% band does not hold for that preset";
}

void oximetry(Outcome& o) {
    const auto t = ChromophoreTable::builtin();
    const BeerLambertFitter fitter(t);
    const auto white = flat_white_reference(t.grid);
    double worst = 0.0;
    for (int k = 0; k <= 10; ++k) {
        for (double thb : {0.005, 0.02}) {
            for (double off : {0.0, 0.15}) {
                const auto i = reflectance_from_attenuation(oracle::attenuation(k / 10.0, thb, off, t), white);
                worst = std::max(worst, std::abs(fitter.fit(i, white).sto2() - k / 10.0));
            }
        }
    }
    std::mt19937_64 rng(20240501);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.005);
    std::vector<double> errors;
    for (int p = 0; p < 1000; ++p) {
        const double s = u(rng);
        auto a = oracle::attenuation(s, 0.008 + 0.012 * u(rng), 0.05 + 0.15 * u(rng), t);
        for (double& v : a) v += noise(rng);
        errors.push_back(std::abs(fitter.fit_attenuation(a).sto2() - s));
    }
    std::sort(errors.begin(), errors.end());
    const double p95 = errors[949];
    o.detail << "round-trip max error " << worst << ", noisy p95 " << p95 << " over 1000 pixels";
    o.require(worst <= 1e-6, "round trip within 1e-6");
    o.require(p95 <= 0.02, "p95 <= 0.02");
}

void shapes(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const gan::DiscriminatorConfig dc;
    gan::Discriminator<float> d(dc, 1);
    nn::Tape<float> off(false);
    const auto s = d.forward(off, {nn::make_var<float>({1, 27, 256, 256}, false, 0.5f)},
                             nn::make_var<float>({1, 1, 256, 256}, false, 0.5f));
    const gan::Generator<float> g(gan::GeneratorConfig{}, 1);
    const auto y = g.forward(off, nn::make_var<float>({1, 3, 256, 256}, false, 0.5f),
                             nn::make_var<float>({1, 24, 256, 256}, false, 0.1f));
    const auto [lo, hi] = std::minmax_element(y->value.begin(), y->value.end());
    o.detail << "D " << s->shape.str() << ", receptive field " << dc.receptive_field() << "; G " << y->shape.str()
             << " in [" << *lo << ", " << *hi << "] (" << seconds_since(t0) << " s)";
    o.require(s->shape == nn::Shape{1, 1, 30, 30}, "D 30x30x1");
    o.require(dc.receptive_field() == 70, "receptive field 70");
    o.require(y->shape == nn::Shape{1, 1, 256, 256}, "G 256x256x1");
    o.require(*lo > 0.0f && *hi < 1.0f, "G output in (0,1)");
}

void gradients(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    double worst_kernel = 0.0;
    std::size_t checks = 0;
    for (auto path : {nn::KernelPath::parallel, nn::KernelPath::reference}) {
        nn::set_kernel_path(path);
        for (const auto& r : nn::kernel_suite(1, 1e-4)) {
            worst_kernel = std::max(worst_kernel, r.max_rel_error);
            o.require(r.passed(), r.name);
            ++checks;
        }
    }
    nn::set_kernel_path(nn::KernelPath::parallel);
    const auto l1 = gan::generator_l1_check(gan::GeneratorConfig{}, 16, 7);
    const auto obj = gan::generator_objective_check(gan::GeneratorConfig{}, gan::DiscriminatorConfig{}, 32, 7);
    o.detail << checks << " kernel checks, worst " << worst_kernel << " (< 1e-4); generator L1 on 16x16 "
             << l1.max_rel_error << ", full objective through D on 32x32 " << obj.max_rel_error << " (< 1e-3; "
             << seconds_since(t0) << " s)";
    o.require(worst_kernel < 1e-4, "kernels < 1e-4");
    o.require(l1.max_rel_error < 1e-3, "end-to-end L1 < 1e-3");
    o.require(obj.max_rel_error < 1e-3, "end-to-end objective < 1e-3");
}

void loss_semantics(Outcome& o) {
    const int n = 8;
    std::vector<float> pred(n), truth(n, 0.5f);
    for (int i = 0; i < n; ++i) pred[i] = 0.1f * i + 0.03f;
    std::vector<std::uint8_t> include(n, 1);
    include[1] = include[6] = 0;
    auto run = [&](double beta, const std::vector<float>& t) {
        nn::Tape<double> tape;
        std::vector<double> p(pred.begin(), pred.end()), tt(t.begin(), t.end());
        auto y_hat = nn::make_var<double>({1, 1, 1, n}, p, true);
        auto scores = nn::make_var<double>({1, 1, 2, 2}, std::vector<double>(4, 0.5));
        gan::LossWeights w;
        w.beta = beta;
        auto l = gan::generator_loss<double>(tape, scores, y_hat, nn::make_var<double>({1, 1, 1, n}, tt), include, w);
        tape.backward(l.total);
        return std::make_tuple(l.total->item(), l.adversarial->item(), y_hat->grad);
    };
    const auto [t1, adv, g1] = run(100.0, truth);
    const auto [t3, adv3, g3] = run(300.0, truth);
    double l1 = 0.0;
    for (int i = 0; i < n; ++i)
        if (include[i]) l1 += std::abs(static_cast<double>(pred[i]) - truth[i]);
    l1 /= 6;
    const bool linear = std::abs((t3 - adv3) - 3 * (t1 - adv)) < 1e-12 && std::abs((t1 - adv) - 100 * l1) < 1e-12;
    std::vector<float> moved = truth;
    moved[1] = 0.0f;
    moved[6] = 1.0f;
    const auto [tm, advm, gm] = run(100.0, moved);
    const bool masked = g1[1] == 0.0 && g1[6] == 0.0 && tm == t1;
    nn::Tape<double> tape;
    const auto half = nn::make_var<double>({1, 1, 4, 4}, false, 0.5);
    const double bce = nn::bce_mean<double>(tape, half, 1.0)->item();
    o.detail << "beta*L1 linear: " << (linear ? "yes" : "no") << "; masked pixels zero loss and gradient: "
             << (masked ? "yes" : "no") << "; BCE(0.5) = " << bce << " vs ln 2 = " << std::log(2.0);
    o.require(linear, "beta linearity");
    o.require(masked, "masked pixels");
    o.require(std::abs(bce - std::log(2.0)) < 1e-12 && std::abs(adv - std::log(2.0)) < 1e-12, "ln 2");
}

// eight 64x64 phantoms seen through the 300-spot bundle, geometry scaled from 192 rows
std::vector<Sample> overfit_samples() {
    const int side = 64;
    const double k = side / 192.0;
    const FibreMask fibres = generate_mask(BundleSpec::preset(300).scaled(k), side, side);
    std::vector<Sample> samples;
    for (int i = 0; i < 8; ++i) {
        PhantomSpec s;
        s.width = side;
        s.height = side;
        s.seed = mix_seed(42, static_cast<std::uint64_t>(i));
        s.sto2_field.correlation_px *= k;
        s.thb_field.correlation_px *= k;
        s.offset_field.correlation_px *= k;
        const Acquisition a = build_acquisition("overfit" + std::to_string(i), 1, phantom(s).cube, fibres);
        samples.push_back({a.rgb, a.shsi, a.target, a.mask});
    }
    return samples;
}

void overfit(Outcome& o) {
    const auto source = gan::SampleSource::from(overfit_samples());
    gan::TrainConfig cfg;
    cfg.max_steps = 2000;
    cfg.eval_every = 25;
    cfg.target_e_bar = 0.05;
    gan::Trainer a(cfg), b(cfg);
    const auto ra = a.fit(source);
    const double e = gan::mean_e_bar(a.generator(), source);
    const auto rb = b.fit(source);
    bool same = ra.steps == rb.steps && a.history().size() == b.history().size();
    for (std::size_t i = 0; same && i < a.history().size(); ++i) {
        const auto &x = a.history()[i], &y = b.history()[i];
        same = x.loss_d == y.loss_d && x.loss_g == y.loss_g && x.l1 == y.l1;
    }
    o.detail << "training-set e_bar " << e << " after " << ra.steps << " steps (" << ra.seconds
             << " s); rerun identical: " << (same ? "yes" : "no");
    o.require(e < 0.05, "e_bar < 0.05");
    o.require(ra.steps <= 2000, "within 2000 steps");
    o.require(same, "deterministic");
}

void metrics_oracles(Outcome& o) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto random_map = [&] {
        StO2Map m(16, 16);
        for (float& v : m.values) v = static_cast<float>(u(rng));
        return m;
    };
    const StO2Map x = random_map();
    const double self = ssim(x, x);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
        const StO2Map a = random_map();
        StO2Map b = random_map();
        if (t % 2)
            for (std::size_t i = 0; i < b.values.size(); ++i) b.values[i] = 0.6f * a.values[i] + 0.4f * b.values[i];
        worst = std::max(worst, std::abs(ssim(a, b) - oracle::brute_ssim(a, b, 11, 1.5, 0.01, 0.03, 1.0)));
    }
    StO2Map gt(4, 1), syn(4, 1);
    gt.values = {0.50f, 0.20f, 0.90f, 0.40f};
    syn.values = {0.55f, 0.30f, 0.10f, 0.40f};
    gt.mask.at(2, 0) = MaskCode::saturated;
    const double e = mean_prediction_error(syn, gt);  // (0.05 + 0.10 + 0) / 3
    const double hap = p_hap(syn, gt);                 // 0.05 is a hit, 0.10 is not
    o.detail << "SSIM(x,x) = " << self << "; brute-force max difference " << worst << "; hand cases e_bar " << e
             << " (0.05), p_HAP " << hap << " (2/3)";
    o.require(std::abs(self - 1.0) < 1e-12, "SSIM(x,x) = 1");
    o.require(worst <= 1e-8, "brute-force SSIM within 1e-8");
    o.require(std::abs(e - 0.05) < 1e-6, "e_bar hand case");
    o.require(std::abs(hap - 2.0 / 3.0) < 1e-12, "p_HAP with inclusive boundary");
}

void ablation(Outcome& o) {
    ExperimentConfig cfg;
    cfg.presets = {0, 300};
    cfg.seeds = {1, 2, 3};
    const auto t0 = std::chrono::steady_clock::now();
    const AblationReport r = run_ablation(cfg, {}, [](const std::string& line) { std::cerr << line << std::endl; });
    const double zero = r.row(0).mean_e_bar_over_seeds, full = r.row(300).mean_e_bar_over_seeds;
    o.detail << "mean test e_bar over seeds 1-3: n_spot 300 " << full << " vs n_spot 0 " << zero << "; SSIM "
             << r.row(300).ssim.mean << " vs " << r.row(0).ssim.mean << " (" << seconds_since(t0) << " s)";
    o.require(full <= zero, "e_bar(300) <= e_bar(0)");
}

void inference_time() {
    const gan::Generator<float> g(gan::GeneratorConfig{}, 1);
    Sample s{Raster(3, 256, 256, 0.5f), Raster(24, 256, 256), Raster(1, 256, 256), PixelMask(256, 256)};
    gan::infer(g, s);  // warm-up
    double total = 0.0;
    for (int i = 0; i < 3; ++i) total += gan::infer(g, s).milliseconds;
    std::cout << "INFO inference 256x256, mean of 3: " << total / 3 << " ms (logged, no bound)" << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
        {"augmentation arithmetic", augmentation},
        {"fibre geometry", fibre_geometry},
        {"oximetry oracle", oximetry},
        {"network shapes", shapes},
        {"gradient suite", gradients},
        {"loss semantics", loss_semantics},
        {"overfit sanity", overfit},
        {"metrics oracles", metrics_oracles},
        {"ablation trend", ablation},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " [exception: " << e.what() << "]";
        }
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << ". " << criteria[i].first << ": " << o.detail.str()
                  << std::endl;
    }
    if (only.empty()) {
        inference_time();
        std::cout << "NOTE not reproduced at desk scale: absolute in-vivo SSIM/e_bar/p_HAP values, the spectral "
                     "reconstruction baseline comparison and the GPU timing claim; inference time above is this "
                     "machine's, without a pass/fail bound"
                  << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
