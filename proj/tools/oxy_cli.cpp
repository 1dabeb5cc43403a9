// oxy: command-line driver for the oximetry pipeline and the fibre-count ablation.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "oxy/config.hpp"
#include "oxy/gan/gradcheck.hpp"
#include "oxy/image_io.hpp"
#include "oxy/nn/checkpoint.hpp"
#include "oxy/pipeline.hpp"
#include "oxy/random.hpp"
#include "oxy/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace oxy;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> n_spot;
    std::vector<std::string> argv;
};

ExperimentConfig resolve(const Globals& g) {
    ExperimentConfig cfg = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
    if (g.seed) cfg.set_seed(*g.seed);
    if (!g.out.empty()) cfg.output_dir = g.out;
    if (g.n_spot) {
        cfg.n_spot = *g.n_spot;
        cfg.custom_bundle.reset();
    }
    cfg.validate();
    return cfg;
}

fs::path out_dir(const ExperimentConfig& cfg) {
    fs::path p(cfg.output_dir);
    fs::create_directories(p);
    return p;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << j.dump(2) << '\n';
}

void provenance(const std::string& command, const Globals& g, const ExperimentConfig& cfg, const json& extra = {}) {
    json j = {{"command", command},
              {"argv", g.argv},
              {"version", kVersion},
              {"modules",
               {{"cube_container", 1}, {"checkpoint", nn::Checkpoint::kVersion}, {"manifest", 1}}},
              {"config_hash", cfg.hash()},
              {"seed", cfg.seed},
              {"config", cfg.to_json()}};
    if (!extra.is_null()) j["inputs"] = extra;
    write_json(out_dir(cfg) / ("provenance_" + command + ".json"), j);
}

BundleSpec bundle_for(const ExperimentConfig& cfg, int height) {
    // presets are defined on a 192-pixel-high frame
    BundleSpec b = cfg.bundle();
    return cfg.custom_bundle ? b : b.scaled(height / 192.0);
}

AcquisitionInputs acquisition_inputs(const ExperimentConfig& cfg, const std::string& white_csv = {}) {
    AcquisitionInputs in;
    in.cod_threshold = cfg.cod_threshold;
    if (!white_csv.empty()) in.white_ref = load_white_reference_csv(white_csv, WavelengthGrid{});
    return in;
}

Sample whole(const Acquisition& a) { return {a.rgb, a.shsi, a.target, a.mask}; }

void save_map_with_previews(const StO2Map& map, const fs::path& dir, const std::string& stem) {
    save_sto2_map(map, dir / (stem + ".map"));
    write_colormap_png(dir / (stem + ".png"), map.width, map.height, map.values, &map.mask);
    write_png(dir / (stem + "_mask.png"), map.mask);
}

json mask_counts(const PixelMask& m) {
    return {{"effective", m.count(MaskCode::effective)},
            {"saturated", m.count(MaskCode::saturated)},
            {"low_cod", m.count(MaskCode::low_cod)},
            {"non_tissue", m.count(MaskCode::non_tissue)}};
}

std::vector<Acquisition> manifest_acquisitions(const Manifest& m, const fs::path& base, const ExperimentConfig& cfg,
                                               Split split) {
    std::vector<Acquisition> out;
    const auto inputs = acquisition_inputs(cfg);
    for (const auto& e : m.acquisitions) {
        if (e.split != split) continue;
        Hypercube cube = e.cube_path.empty() ? phantom(e.phantom).cube : load_cube(base / e.cube_path);
        const FibreMask fibres = generate_mask(bundle_for(cfg, cube.height), cube.width, cube.height);
        out.push_back(build_acquisition(e.id, e.animal_id, cube, fibres, inputs));
    }
    return out;
}

int cmd_phantom(const Globals& g, int count) {
    const auto cfg = resolve(g);
    const auto dir = out_dir(cfg);
    const auto animals = assign_animals(count, std::max(1, count / 3), 1);
    json listing = json::array();
    for (int i = 0; i < count; ++i) {
        PhantomSpec spec = cfg.phantom;
        if (count > 1) spec.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(i));
        if (count > 1) spec.animal_id = animals[i];
        const Phantom p = phantom(spec);
        char stem[32];
        std::snprintf(stem, sizeof stem, "phantom_%03d", i);
        save_cube(p.cube, dir / (std::string(stem) + ".cube"));
        save_map_with_previews(p.truth, dir, std::string(stem) + "_truth");
        write_json(dir / (std::string(stem) + ".json"), json(spec));
        listing.push_back(stem);
    }
    provenance("phantom", g, cfg, {{"count", count}, {"files", listing}});
    std::cout << "wrote " << count << " phantom(s) to " << dir.string() << "\n";
    return 0;
}

int cmd_synth_rgb(const Globals& g, const std::string& cube_path, const std::string& response_csv) {
    const auto cfg = resolve(g);
    const Hypercube cube = load_cube(cube_path);
    const SpectralResponse resp =
        response_csv.empty() ? SpectralResponse::gaussian_default(cube.grid) : SpectralResponse::load_csv(response_csv, cube.grid);
    const RgbImage rgb = synthesize_rgb(cube, resp);
    const auto dir = out_dir(cfg);
    write_png(dir / "rgb.png", rgb);
    save_cube(to_cube(to_raster(rgb), WavelengthGrid{0.0, 1.0, 3}), dir / "rgb.cube");
    provenance("synth-rgb", g, cfg, {{"cube", cube_path}, {"response", response_csv}});
    std::cout << "rgb " << rgb.width << "x" << rgb.height << " -> " << (dir / "rgb.png").string() << "\n";
    return 0;
}

int cmd_sto2_oracle(const Globals& g, const std::string& cube_path, const std::string& white_csv) {
    const auto cfg = resolve(g);
    const Hypercube cube = load_cube(cube_path);
    const auto in = acquisition_inputs(cfg, white_csv);
    const StO2Map map = estimate_sto2_map(cube, in.white_ref, in.table, cfg.cod_threshold);
    const auto dir = out_dir(cfg);
    save_map_with_previews(map, dir, "sto2");
    const json counts = mask_counts(map.mask);
    write_json(dir / "sto2_mask_counts.json", counts);
    provenance("sto2-oracle", g, cfg, {{"cube", cube_path}, {"white", white_csv}});
    std::cout << "effective pixels: " << counts["effective"] << " of " << map.values.size() << "\n";
    return 0;
}

int cmd_mask(const Globals& g, int width, int height) {
    const auto cfg = resolve(g);
    if (width <= 0) width = cfg.phantom.width;
    if (height <= 0) height = cfg.phantom.height;
    const BundleSpec b = bundle_for(cfg, height);
    const FibreMask m = generate_mask(b, width, height);
    const auto dir = out_dir(cfg);
    save_mask_csv(m, dir / "mask.csv");
    save_mask_png(m, dir / "mask.png");
    write_json(dir / "mask.json", {{"n_spot_target", b.n_spot_target},
                                   {"r", b.r},
                                   {"d", b.d},
                                   {"gamma", b.gamma()},
                                   {"bundle_radius", m.bundle_radius},
                                   {"untrimmed_count", m.untrimmed_count},
                                   {"spots", m.size()}});
    provenance("mask", g, cfg, {{"width", width}, {"height", height}});
    std::cout << m.size() << " spots (" << m.untrimmed_count << " lattice centres inside the bundle), gamma "
              << b.gamma() << "\n";
    return 0;
}

int cmd_shsi(const Globals& g, const std::string& cube_path) {
    const auto cfg = resolve(g);
    const Hypercube cube = load_cube(cube_path);
    const FibreMask m = generate_mask(bundle_for(cfg, cube.height), cube.width, cube.height);
    const Hypercube sparse = m.size() ? apply_mask(cube, m) : Hypercube(cube.width, cube.height, cube.grid, 0.0f);
    const auto dir = out_dir(cfg);
    save_cube(sparse, dir / "shsi.cube");
    save_mask_png(m, dir / "shsi_mask.png");
    provenance("shsi", g, cfg, {{"cube", cube_path}});
    std::cout << "sparse cube with " << m.size() << " spots -> " << (dir / "shsi.cube").string() << "\n";
    return 0;
}

int cmd_augment(const Globals& g, int count, int test_count, const std::vector<std::string>& cubes) {
    const auto cfg = resolve(g);
    const auto dir = out_dir(cfg);
    Manifest m;
    m.augment = cfg.augment;
    const int n_train = cubes.empty() ? (count > 0 ? count : cfg.phantom_count) : static_cast<int>(cubes.size());
    const int animals = std::max(1, n_train / 3);
    const auto train_ids = assign_animals(n_train, animals, 1);
    const auto test_ids = assign_animals(std::max(test_count, 1), std::max(1, test_count / 3), animals + 1);
    for (int i = 0; i < n_train + test_count; ++i) {
        const bool train = i < n_train;
        ManifestEntry e;
        e.split = train ? Split::train : Split::test;
        e.animal_id = train ? train_ids[i] : test_ids[i - n_train];
        e.id = (train ? "train_" : "test_") + std::to_string(train ? i : i - n_train);
        e.phantom = cfg.phantom;
        e.phantom.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(i));
        e.phantom.animal_id = e.animal_id;
        int w = e.phantom.width, h = e.phantom.height;
        if (train && !cubes.empty()) {
            const Hypercube cube = load_cube(cubes[i]);
            e.cube_path = fs::absolute(cubes[i]).string();
            w = cube.width;
            h = cube.height;
        }
        if (train) {
            const std::size_t index = m.acquisitions.size();
            const auto crops = plan_augmentation(w, h, index, m.augment);
            m.samples.insert(m.samples.end(), crops.begin(), crops.end());
        }
        m.acquisitions.push_back(e);
    }
    m.save(dir / "manifest.json");
    provenance("augment", g, cfg, {{"count", n_train}, {"test_count", test_count}, {"cubes", cubes}});
    std::cout << m.split_count(Split::train) << " training acquisitions -> " << m.samples.size() << " samples ("
              << (dir / "manifest.json").string() << ")\n";
    return 0;
}

int cmd_train(const Globals& g, const std::string& manifest_path, std::int64_t steps) {
    auto cfg = resolve(g);
    if (steps > 0) cfg.train.max_steps = steps;
    const Manifest m = Manifest::load(manifest_path);
    const auto train = manifest_acquisitions(m, fs::path(manifest_path).parent_path(), cfg, Split::train);
    const auto source = crop_source(train, m.augment);
    gan::Trainer trainer(cfg.train);
    const auto dir = out_dir(cfg);
    const auto result = trainer.fit(source, dir, [](const gan::LossRecord& r) {
        if (r.step % 50 == 0 || r.step == 1) {
            std::cout << "step " << r.step << "  loss_D " << r.loss_d << "  loss_G " << r.loss_g << "  l1 " << r.l1 << "\n";
        }
    });
    provenance("train", g, cfg, {{"manifest", manifest_path}, {"samples", source.size}, {"steps", result.steps}});
    std::cout << result.steps << " steps in " << result.seconds << " s -> " << (dir / "checkpoint_final.oxck").string()
              << "\n";
    return 0;
}

int cmd_infer(const Globals& g, const std::string& checkpoint, const std::string& cube_path) {
    const auto cfg = resolve(g);
    auto gen = gan::load_generator(checkpoint);
    const Hypercube cube = load_cube(cube_path);
    const FibreMask fibres = generate_mask(bundle_for(cfg, cube.height), cube.width, cube.height);
    const Acquisition acq = build_acquisition("infer", 0, cube, fibres, acquisition_inputs(cfg));
    const auto pred = gan::infer(*gen, whole(acq));
    const auto dir = out_dir(cfg);
    save_map_with_previews(pred.map, dir, "prediction");
    write_json(dir / "timing.json", {{"width", cube.width}, {"height", cube.height}, {"milliseconds", pred.milliseconds}});
    provenance("infer", g, cfg, {{"checkpoint", checkpoint}, {"cube", cube_path}});
    std::cout << "inference " << cube.width << "x" << cube.height << " in " << std::fixed << std::setprecision(1)
              << pred.milliseconds << " ms\n";
    return 0;
}

int cmd_evaluate(const Globals& g, const std::vector<std::string>& preds, const std::vector<std::string>& truths) {
    const auto cfg = resolve(g);
    if (preds.size() != truths.size() || preds.empty()) throw std::runtime_error("need matching --pred and --truth lists");
    std::vector<AcquisitionScore> rows;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const StO2Map p = load_sto2_map(preds[i]);
        const StO2Map t = load_sto2_map(truths[i]);
        auto s = score(fs::path(preds[i]).stem().string(), p, t, cfg.ssim);
        s.p_hap = p_hap(p, t, cfg.hap_threshold);
        rows.push_back(s);
    }
    const EvalReport report = aggregate(rows);
    const auto dir = out_dir(cfg);
    report.save_json(dir / "eval.json");
    report.save_csv(dir / "eval.csv");
    report.save_boxplot_csv(dir / "eval_boxplot.csv");
    provenance("evaluate", g, cfg, {{"pred", preds}, {"truth", truths}});
    std::cout << std::setprecision(4) << "SSIM " << report.ssim.mean << " +- " << report.ssim.std << "   e_bar "
              << report.e_bar.mean << " +- " << report.e_bar.std << "   p_HAP " << report.p_hap.mean << "\n";
    return 0;
}

int cmd_gradcheck(const Globals& g, bool skip_network) {
    const auto cfg = resolve(g);
    std::vector<nn::GradCheckReport> reports;
    for (auto path : {nn::KernelPath::parallel, nn::KernelPath::reference}) {
        nn::set_kernel_path(path);
        for (auto r : nn::kernel_suite(cfg.seed)) {
            r.name += path == nn::KernelPath::parallel ? " [parallel]" : " [reference]";
            reports.push_back(r);
        }
    }
    nn::set_kernel_path(nn::KernelPath::parallel);
    if (!skip_network) {
        reports.push_back(gan::generator_l1_check(cfg.train.generator, 16, cfg.seed));
        reports.push_back(gan::generator_objective_check(cfg.train.generator, cfg.train.discriminator, 32, cfg.seed));
    }
    bool ok = true;
    json rows = json::array();
    for (const auto& r : reports) {
        ok = ok && r.passed();
        std::cout << (r.passed() ? "ok    " : "FAIL  ") << std::left << std::setw(40) << r.name << std::scientific
                  << std::setprecision(2) << r.max_rel_error << " < " << r.tolerance << "  (" << r.coordinates
                  << " coords)\n";
        rows.push_back({{"name", r.name}, {"max_rel_error", r.max_rel_error}, {"tolerance", r.tolerance},
                        {"coordinates", r.coordinates}, {"passed", r.passed()}});
    }
    write_json(out_dir(cfg) / "gradcheck.json", rows);
    provenance("gradcheck", g, cfg);
    return ok ? 0 : 2;
}

int cmd_ablation(const Globals& g, const std::vector<int>& presets, const std::vector<std::uint64_t>& seeds,
                 std::int64_t steps) {
    auto cfg = resolve(g);
    if (!presets.empty()) cfg.presets = presets;
    if (!seeds.empty()) cfg.seeds = seeds;
    if (steps > 0) cfg.desk_steps = steps;
    cfg.validate();
    const auto dir = out_dir(cfg);
    const auto report = run_ablation(cfg, dir, [](const std::string& s) { std::cout << s << std::endl; });
    provenance("ablation", g, cfg);
    std::cout << "\n n_spot      r      d  gamma  spots   SSIM            e_bar           p_HAP    infer ms\n";
    for (const auto& r : report.rows) {
        std::printf("%7d %6.2f %6.2f %6.3f %6zu   %.3f +- %.3f   %.3f +- %.3f   %.3f   %8.1f\n", r.n_spot, r.r, r.d,
                    r.gamma, r.spots, r.ssim.mean, r.ssim.std, r.e_bar.mean, r.e_bar.std, r.p_hap.mean,
                    r.mean_infer_ms);
    }
    return 0;
}

int cmd_init_config(const Globals& g) {
    if (g.out.empty()) {
        std::cout << default_config_toml();
        return 0;
    }
    fs::create_directories(g.out);
    std::ofstream(fs::path(g.out) / "config.toml") << default_config_toml();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"oxy: tissue oxygenation from RGB and sparse spectra"};
    app.require_subcommand(1);
    Globals g;
    g.argv.assign(argv, argv + argc);
    app.add_option("--config", g.config_path, "TOML experiment config")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Base seed (overrides the config)");
    app.add_option("--out", g.out, "Output directory (overrides the config)");
    app.set_version_flag("--version", std::string(kVersion));

    int count = 1;
    auto* phantom_cmd = app.add_subcommand("phantom", "Generate synthetic hypercube phantoms with ground truth");
    phantom_cmd->add_option("--count", count, "Number of phantoms")->check(CLI::PositiveNumber);

    std::string cube, response, white;
    auto* rgb_cmd = app.add_subcommand("synth-rgb", "Simulate an RGB image from a hypercube");
    rgb_cmd->add_option("--cube", cube, "Input cube")->required()->check(CLI::ExistingFile);
    rgb_cmd->add_option("--response", response, "Camera response CSV (nm,r,g,b)")->check(CLI::ExistingFile);

    auto* oracle_cmd = app.add_subcommand("sto2-oracle", "Per-pixel Beer-Lambert StO2 with exclusion mask");
    oracle_cmd->add_option("--cube", cube, "Input cube")->required()->check(CLI::ExistingFile);
    oracle_cmd->add_option("--white", white, "White reference CSV (nm,value)")->check(CLI::ExistingFile);

    int width = 0, height = 0;
    int n_spot = -1;
    auto* mask_cmd = app.add_subcommand("mask", "Generate a fibre-bundle sampling mask");
    mask_cmd->add_option("--width", width, "Image width (default: phantom width)");
    mask_cmd->add_option("--height", height, "Image height (default: phantom height)");
    mask_cmd->add_option("--n-spot", n_spot, "Bundle preset: 0, 121, 171 or 300");

    auto* shsi_cmd = app.add_subcommand("shsi", "Sample a hypercube through the fibre bundle");
    shsi_cmd->add_option("--cube", cube, "Input cube")->required()->check(CLI::ExistingFile);
    shsi_cmd->add_option("--n-spot", n_spot, "Bundle preset: 0, 121, 171 or 300");

    int test_count = 0;
    std::vector<std::string> cubes;
    auto* augment_cmd = app.add_subcommand("augment", "Plan the sliding-window/flip training set and write a manifest");
    augment_cmd->add_option("--count", count, "Phantom acquisitions (default: phantom.count)");
    augment_cmd->add_option("--test", test_count, "Additional held-out phantom acquisitions");
    augment_cmd->add_option("--cube", cubes, "Use existing cubes instead of phantoms")->check(CLI::ExistingFile);

    std::string manifest;
    std::int64_t steps = 0;
    auto* train_cmd = app.add_subcommand("train", "Train the dual-input generator adversarially");
    train_cmd->add_option("--manifest", manifest, "Manifest from `augment`")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--steps", steps, "Step budget (overrides train.max_steps)");
    train_cmd->add_option("--n-spot", n_spot, "Bundle preset: 0, 121, 171 or 300");

    std::string checkpoint;
    auto* infer_cmd = app.add_subcommand("infer", "Predict an StO2 map from a cube's RGB and sparse spectra");
    infer_cmd->add_option("--checkpoint", checkpoint, "Checkpoint from `train`")->required()->check(CLI::ExistingFile);
    infer_cmd->add_option("--cube", cube, "Input cube")->required()->check(CLI::ExistingFile);
    infer_cmd->add_option("--n-spot", n_spot, "Bundle preset: 0, 121, 171 or 300");

    std::vector<std::string> preds, truths;
    auto* eval_cmd = app.add_subcommand("evaluate", "SSIM, mean prediction error and p_HAP over map pairs");
    eval_cmd->add_option("--pred", preds, "Predicted map(s)")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--truth", truths, "Ground-truth map(s), same order")->required()->check(CLI::ExistingFile);

    bool kernels_only = false;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference checks of every differentiable op");
    grad_cmd->add_flag("--kernels-only", kernels_only, "Skip the end-to-end network checks");

    std::vector<int> presets;
    std::vector<std::uint64_t> seeds;
    auto* ablation_cmd = app.add_subcommand("ablation", "Fibre-count ablation on the desk-scale phantom suite");
    ablation_cmd->add_option("--presets", presets, "Comma-separated n_spot presets")->delimiter(',');
    ablation_cmd->add_option("--seeds", seeds, "Comma-separated training seeds")->delimiter(',');
    ablation_cmd->add_option("--steps", steps, "Training steps per run");

    auto* init_cmd = app.add_subcommand("init-config", "Print the default config as TOML (or write it under --out)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (n_spot >= 0) g.n_spot = n_spot;
        if (*phantom_cmd) return cmd_phantom(g, count);
        if (*rgb_cmd) return cmd_synth_rgb(g, cube, response);
        if (*oracle_cmd) return cmd_sto2_oracle(g, cube, white);
        if (*mask_cmd) return cmd_mask(g, width, height);
        if (*shsi_cmd) return cmd_shsi(g, cube);
        if (*augment_cmd) return cmd_augment(g, augment_cmd->count("--count") ? count : 0, test_count, cubes);
        if (*train_cmd) return cmd_train(g, manifest, steps);
        if (*infer_cmd) return cmd_infer(g, checkpoint, cube);
        if (*eval_cmd) return cmd_evaluate(g, preds, truths);
        if (*grad_cmd) return cmd_gradcheck(g, kernels_only);
        if (*ablation_cmd) return cmd_ablation(g, presets, seeds, steps);
        if (*init_cmd) return cmd_init_config(g);
    } catch (const std::exception& e) {
        std::cerr << "oxy: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
