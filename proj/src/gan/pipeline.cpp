#include "oxy/pipeline.hpp"

#include <fstream>
#include <stdexcept>

#include "oxy/random.hpp"

namespace oxy {

std::vector<PhantomSpec> suite_specs(const ExperimentConfig& cfg, Split split) {
    const bool train = split == Split::train;
    const int count = train ? cfg.suite.train_acquisitions : cfg.suite.test_acquisitions;
    const int animals = train ? cfg.suite.train_animals : cfg.suite.test_animals;
    // test animals are numbered after the training ones so the splits never share an animal
    const auto ids = assign_animals(count, animals, train ? 1 : cfg.suite.train_animals + 1);
    std::vector<PhantomSpec> out;
    for (int i = 0; i < count; ++i) {
        PhantomSpec s = cfg.phantom;
        s.width = cfg.suite.width;
        s.height = cfg.suite.height;
        const double k = cfg.suite.scale();
        s.sto2_field.correlation_px *= k;
        s.thb_field.correlation_px *= k;
        s.offset_field.correlation_px *= k;
        s.seed = mix_seed(cfg.seed, (train ? 0x1000u : 0x2000u) + static_cast<std::uint64_t>(i));
        s.animal_id = ids[i];
        out.push_back(s);
    }
    return out;
}

SuiteData build_suite(const ExperimentConfig& cfg, const std::vector<Phantom>& train, const std::vector<Phantom>& test,
                      const BundleSpec& bundle) {
    SuiteData data;
    data.bundle = bundle;
    data.fibres = generate_mask(bundle, cfg.suite.width, cfg.suite.height);
    AcquisitionInputs inputs;
    inputs.cod_threshold = cfg.cod_threshold;
    const auto train_specs = suite_specs(cfg, Split::train);
    const auto test_specs = suite_specs(cfg, Split::test);
    if (train.size() != train_specs.size() || test.size() != test_specs.size()) {
        throw std::invalid_argument("phantom lists do not match the suite");
    }
    for (std::size_t i = 0; i < train.size(); ++i) {
        data.train.push_back(
            build_acquisition("train" + std::to_string(i), train_specs[i].animal_id, train[i].cube, data.fibres, inputs));
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
        data.test.push_back(
            build_acquisition("test" + std::to_string(i), test_specs[i].animal_id, test[i].cube, data.fibres, inputs));
    }
    return data;
}

gan::SampleSource crop_source(const std::vector<Acquisition>& acqs, const AugmentParams& params) {
    auto shared = std::make_shared<std::vector<Acquisition>>(acqs);
    auto plan = std::make_shared<std::vector<CropSpec>>();
    for (std::size_t a = 0; a < shared->size(); ++a) {
        const auto crops = plan_augmentation((*shared)[a].width(), (*shared)[a].height(), a, params);
        plan->insert(plan->end(), crops.begin(), crops.end());
    }
    return {plan->size(), [shared, plan, params](std::size_t i) {
                const CropSpec& c = plan->at(i);
                return materialize((*shared)[c.acquisition], c, params);
            }};
}

bool all_zero(const Raster& r) {
    for (float v : r.data) {
        if (v != 0.0f) return false;
    }
    return true;
}

const AblationRow& AblationReport::row(int n_spot) const {
    for (const auto& r : rows) {
        if (r.n_spot == n_spot) return r;
    }
    throw std::out_of_range("no ablation row for n_spot = " + std::to_string(n_spot));
}

namespace {

nlohmann::json summary_json(const Summary& s) {
    return {{"mean", s.mean}, {"std", s.std},       {"q1", s.q1},   {"median", s.median},
            {"q3", s.q3},     {"iqr", s.iqr},       {"min", s.min}, {"max", s.max}};
}

}  // namespace

nlohmann::json AblationReport::to_json() const {
    nlohmann::json j;
    for (const auto& r : rows) {
        j["rows"].push_back({{"n_spot", r.n_spot},
                             {"r", r.r},
                             {"d", r.d},
                             {"gamma", r.gamma},
                             {"spots", r.spots},
                             {"shsi_all_zero", r.shsi_all_zero},
                             {"ssim", summary_json(r.ssim)},
                             {"e_bar", summary_json(r.e_bar)},
                             {"p_hap", summary_json(r.p_hap)},
                             {"seed_mean_e_bar", r.seed_mean_e_bar},
                             {"mean_e_bar_over_seeds", r.mean_e_bar_over_seeds},
                             {"mean_infer_ms", r.mean_infer_ms}});
    }
    for (const auto& run : runs) {
        j["runs"].push_back({{"n_spot", run.n_spot},
                             {"seed", run.seed},
                             {"steps", run.train.steps},
                             {"early_stopped", run.train.early_stopped},
                             {"train_seconds", run.train.seconds},
                             {"mean_infer_ms", run.mean_infer_ms},
                             {"report", run.report.to_json()}});
    }
    return j;
}

void AblationReport::save_json(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << to_json().dump(2) << '\n';
}

void AblationReport::save_csv(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os.precision(6);
    os << "n_spot,r,d,gamma,spots,ssim_mean,ssim_std,e_bar_mean,e_bar_std,p_hap_mean,p_hap_std,infer_ms\n";
    for (const auto& r : rows) {
        os << r.n_spot << ',' << r.r << ',' << r.d << ',' << r.gamma << ',' << r.spots << ',' << r.ssim.mean << ','
           << r.ssim.std << ',' << r.e_bar.mean << ',' << r.e_bar.std << ',' << r.p_hap.mean << ',' << r.p_hap.std << ','
           << r.mean_infer_ms << '\n';
    }
}

AblationReport run_ablation(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                            const std::function<void(const std::string&)>& log) {
    cfg.validate();
    const auto say = [&](const std::string& s) {
        if (log) log(s);
    };
    std::vector<Phantom> train_ph, test_ph;
    for (const auto& s : suite_specs(cfg, Split::train)) train_ph.push_back(phantom(s));
    for (const auto& s : suite_specs(cfg, Split::test)) test_ph.push_back(phantom(s));

    AblationReport report;
    for (int n_spot : cfg.presets) {
        const BundleSpec bundle = BundleSpec::preset(n_spot).scaled(cfg.suite.scale());
        const SuiteData data = build_suite(cfg, train_ph, test_ph, bundle);
        AblationRow row;
        row.n_spot = n_spot;
        row.r = bundle.r;
        row.d = bundle.d;
        row.gamma = bundle.gamma();
        row.spots = data.fibres.size();
        row.shsi_all_zero = true;
        for (const auto* split : {&data.train, &data.test}) {
            for (const auto& a : *split) row.shsi_all_zero = row.shsi_all_zero && all_zero(a.shsi);
        }
        say("preset " + std::to_string(n_spot) + ": " + std::to_string(row.spots) + " spots");

        const auto source = crop_source(data.train, cfg.desk_augment);
        std::vector<Sample> tests;
        for (const auto& a : data.test) tests.push_back(make_test(a, cfg.desk_augment));

        std::vector<AcquisitionScore> all_scores;
        double infer_ms = 0.0;
        for (std::uint64_t seed : cfg.seeds) {
            gan::TrainConfig tc = cfg.train;
            tc.seed = mix_seed(seed, static_cast<std::uint64_t>(n_spot));
            tc.max_steps = cfg.desk_steps;
            tc.eval_every = 0;
            tc.target_e_bar = 0;
            gan::Trainer trainer(tc);
            const auto run_dir = out_dir.empty() ? std::filesystem::path{}
                                                 : out_dir / ("nspot_" + std::to_string(n_spot)) / ("seed_" + std::to_string(seed));
            AblationRun run;
            run.n_spot = n_spot;
            run.seed = seed;
            run.train = trainer.fit(source, run_dir);
            std::vector<AcquisitionScore> scores;
            double ms = 0.0;
            for (std::size_t i = 0; i < tests.size(); ++i) {
                const auto pred = gan::infer(trainer.generator(), tests[i]);
                ms += pred.milliseconds;
                scores.push_back(score(data.test[i].id, pred.map, gan::truth_map(tests[i]), cfg.ssim));
            }
            run.report = aggregate(scores);
            run.mean_infer_ms = ms / static_cast<double>(tests.size());
            infer_ms += run.mean_infer_ms;
            row.seed_mean_e_bar.push_back(run.report.e_bar.mean);
            all_scores.insert(all_scores.end(), scores.begin(), scores.end());
            if (!run_dir.empty()) run.report.save_json(run_dir / "eval.json");
            say("  seed " + std::to_string(seed) + ": e_bar " + std::to_string(run.report.e_bar.mean) + ", ssim " +
                std::to_string(run.report.ssim.mean) + " (" + std::to_string(run.train.seconds) + " s)");
            report.runs.push_back(std::move(run));
        }
        const EvalReport pooled = aggregate(all_scores);
        row.ssim = pooled.ssim;
        row.e_bar = pooled.e_bar;
        row.p_hap = pooled.p_hap;
        double sum = 0.0;
        for (double e : row.seed_mean_e_bar) sum += e;
        row.mean_e_bar_over_seeds = sum / static_cast<double>(row.seed_mean_e_bar.size());
        row.mean_infer_ms = infer_ms / static_cast<double>(cfg.seeds.size());
        report.rows.push_back(row);
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        report.save_json(out_dir / "ablation.json");
        report.save_csv(out_dir / "ablation.csv");
    }
    return report;
}

}  // namespace oxy
