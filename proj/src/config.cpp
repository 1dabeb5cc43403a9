#include "oxy/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "toml.hpp"

namespace oxy {

namespace gan {

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
    j = {{"rgb_channels", c.rgb_channels},
         {"shsi_channels", c.shsi_channels},
         {"rgb_stem_channels", c.rgb_stem_channels},
         {"shsi_stem_channels", c.shsi_stem_channels},
         {"stem_kernel", c.stem_kernel},
         {"downsamples", c.downsamples},
         {"branch_blocks", c.branch_blocks},
         {"fusion_channels", c.fusion_channels},
         {"trunk_blocks", c.trunk_blocks},
         {"out_channels", c.out_channels},
         {"init_std", c.init_std}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
    c.rgb_channels = j.at("rgb_channels");
    c.shsi_channels = j.at("shsi_channels");
    c.rgb_stem_channels = j.at("rgb_stem_channels");
    c.shsi_stem_channels = j.at("shsi_stem_channels");
    c.stem_kernel = j.at("stem_kernel");
    c.downsamples = j.at("downsamples");
    c.branch_blocks = j.at("branch_blocks");
    c.fusion_channels = j.at("fusion_channels");
    c.trunk_blocks = j.at("trunk_blocks");
    c.out_channels = j.at("out_channels");
    c.init_std = j.at("init_std");
}

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
    j = {{"in_channels", c.in_channels}, {"channels", c.channels}, {"strides", c.strides}, {"kernel", c.kernel},
         {"pad", c.pad},           {"slope", c.slope},       {"norm", c.norm},       {"init_std", c.init_std}};
}

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
    c.in_channels = j.at("in_channels");
    c.channels = j.at("channels").get<std::vector<int>>();
    c.strides = j.at("strides").get<std::vector<int>>();
    c.kernel = j.at("kernel");
    c.pad = j.at("pad");
    c.slope = j.at("slope");
    c.norm = j.at("norm");
    c.init_std = j.at("init_std");
}

void to_json(nlohmann::json& j, const LossWeights& w) { j = {{"beta", w.beta}, {"bce_clamp", w.bce_clamp}}; }

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"generator", c.generator},
         {"discriminator", c.discriminator},
         {"loss", c.loss},
         {"adam_g", c.adam_g},
         {"adam_d", c.adam_d},
         {"batch_size", c.batch_size},
         {"epochs", c.epochs},
         {"max_steps", c.max_steps},
         {"checkpoint_every", c.checkpoint_every},
         {"eval_every", c.eval_every},
         {"target_e_bar", c.target_e_bar},
         {"mask_adversarial", c.mask_adversarial},
         {"seed", c.seed}};
}

}  // namespace gan

namespace nn {
void to_json(nlohmann::json& j, const AdamConfig& c) {
    j = {{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
}
}  // namespace nn

void SuiteSpec::validate() const {
    if (train_acquisitions < 1 || test_acquisitions < 1 || train_animals < 1 || test_animals < 1) {
        throw std::invalid_argument("suite needs at least one acquisition and animal per split");
    }
    if (train_animals > train_acquisitions || test_animals > test_acquisitions) {
        throw std::invalid_argument("suite has more animals than acquisitions");
    }
    if (width < 8 || height < 8) throw std::invalid_argument("suite images too small");
}

void ExperimentConfig::validate() const {
    if (!(cod_threshold > 0 && cod_threshold < 1)) throw std::invalid_argument("cod_threshold must lie in (0, 1)");
    if (phantom_count < 1) throw std::invalid_argument("phantom count must be positive");
    if (!(hap_threshold > 0 && hap_threshold <= 1)) throw std::invalid_argument("hap_threshold must lie in (0, 1]");
    if (presets.empty() || seeds.empty()) throw std::invalid_argument("ablation needs presets and seeds");
    if (desk_steps < 1) throw std::invalid_argument("ablation max_steps must be positive");
    phantom.validate();
    suite.validate();
    bundle().validate();
    train.validate();
    for (const auto& a : {augment, desk_augment}) {
        if (a.window < 1 || a.stride < 1 || a.out_size < 1) throw std::invalid_argument("augment parameters must be positive");
        if (a.out_size % train.generator.size_multiple() != 0) {
            throw std::invalid_argument("augment out_size must be divisible by " + std::to_string(train.generator.size_multiple()));
        }
    }
}

void ExperimentConfig::set_seed(std::uint64_t s) {
    seed = s;
    train.seed = s;
}

BundleSpec ExperimentConfig::bundle() const { return custom_bundle ? *custom_bundle : BundleSpec::preset(n_spot); }

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json b = {{"n_spot", bundle().n_spot_target}, {"r", bundle().r}, {"d", bundle().d}};
    if (bundle().bundle_radius) b["bundle_radius"] = *bundle().bundle_radius;
    const auto aug = [](const AugmentParams& a) {
        return nlohmann::json{{"window", a.window}, {"stride", a.stride}, {"out_size", a.out_size}};
    };
    return {{"seed", seed},
            {"output_dir", output_dir},
            {"cod_threshold", cod_threshold},
            {"phantom", phantom},
            {"phantom_count", phantom_count},
            {"suite",
             {{"train_acquisitions", suite.train_acquisitions},
              {"train_animals", suite.train_animals},
              {"test_acquisitions", suite.test_acquisitions},
              {"test_animals", suite.test_animals},
              {"width", suite.width},
              {"height", suite.height}}},
            {"bundle", b},
            {"augment", aug(augment)},
            {"desk_augment", aug(desk_augment)},
            {"desk_steps", desk_steps},
            {"train", train},
            {"ssim",
             {{"window", ssim.window},
              {"sigma", ssim.sigma},
              {"k1", ssim.k1},
              {"k2", ssim.k2},
              {"dynamic_range", ssim.dynamic_range}}},
            {"hap_threshold", hap_threshold},
            {"presets", presets},
            {"seeds", seeds}};
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string ExperimentConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json().dump())));
    return buf;
}

namespace {

// Reads keys out of one TOML table and rejects the ones nobody asked for.
class Section {
public:
    Section(const toml::table* t, std::string name, std::string origin)
        : t_(t), name_(std::move(name)), origin_(std::move(origin)) {}

    template <class V>
    Section& get(const char* key, V& out) {
        seen_.insert(key);
        if (!t_) return *this;
        const toml::node* n = t_->get(key);
        if (!n) return *this;
        if constexpr (std::is_same_v<V, bool>) {
            auto v = n->value<bool>();
            if (!v || !n->is_boolean()) fail(key, "a boolean");
            out = *v;
        } else if constexpr (std::is_integral_v<V>) {
            auto v = n->value<std::int64_t>();
            if (!v || !n->is_integer()) fail(key, "an integer");
            if constexpr (std::is_unsigned_v<V>) {
                if (*v < 0) fail(key, "a non-negative integer");
            }
            out = static_cast<V>(*v);
        } else if constexpr (std::is_floating_point_v<V>) {
            auto v = n->value<double>();
            if (!v) fail(key, "a number");
            out = static_cast<V>(*v);
        } else if constexpr (std::is_same_v<V, std::string>) {
            auto v = n->value<std::string>();
            if (!v) fail(key, "a string");
            out = *v;
        } else {
            // std::vector of integers
            const toml::array* arr = n->as_array();
            if (!arr) fail(key, "an array");
            out.clear();
            for (const auto& el : *arr) {
                auto v = el.value<std::int64_t>();
                if (!v || !el.is_integer() || *v < 0) fail(key, "an array of non-negative integers");
                out.push_back(static_cast<typename V::value_type>(*v));
            }
        }
        return *this;
    }

    Section& field(const char* key, FieldSpec& f) {
        seen_.insert(key);
        if (!t_) return *this;
        const toml::node* n = t_->get(key);
        if (!n) return *this;
        const toml::table* sub = n->as_table();
        if (!sub) fail(key, "a table {correlation_px, lo, hi}");
        Section s(sub, name_ + "." + key, origin_);
        s.get("correlation_px", f.correlation_px).get("lo", f.lo).get("hi", f.hi).finish();
        return *this;
    }

    bool has(const char* key) const { return t_ && t_->get(key); }

    void finish(const std::set<std::string>& nested = {}) const {
        if (!t_) return;
        for (const auto& [k, v] : *t_) {
            const std::string key(k.str());
            if (!seen_.count(key) && !nested.count(key)) {
                throw std::runtime_error(where(k.source()) + ": unknown key '" + qualified(key) + "'");
            }
        }
    }

private:
    std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }
    std::string where(const toml::source_region& src) const {
        if (src.begin.line == 0) return origin_;
        return origin_ + ":" + std::to_string(src.begin.line);
    }
    [[noreturn]] void fail(const char* key, const char* expected) const {
        const toml::node* n = t_->get(key);
        throw std::runtime_error(where(n ? n->source() : toml::source_region{}) + ": '" + qualified(key) + "' must be " + expected);
    }

    const toml::table* t_;
    std::string name_;
    std::string origin_;
    std::set<std::string> seen_;
};

const toml::table* sub_table(const toml::table& root, const char* name, const std::string& origin) {
    const toml::node* n = root.get(name);
    if (!n) return nullptr;
    if (!n->as_table()) throw std::runtime_error(origin + ": '" + name + "' must be a table");
    return n->as_table();
}

}  // namespace

ExperimentConfig parse_config(const std::string& toml_text, const std::string& origin) {
    toml::table root;
    try {
        root = toml::parse(toml_text, origin);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << origin << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
        throw std::runtime_error(os.str());
    }

    ExperimentConfig c;
    const std::set<std::string> sections{"oximetry", "phantom",   "suite",         "bundle",  "augment",
                                         "ablation", "train",     "generator",     "metrics", "discriminator"};
    Section top(&root, "", origin);
    top.get("seed", c.seed).get("output_dir", c.output_dir).finish(sections);

    Section(sub_table(root, "oximetry", origin), "oximetry", origin).get("cod_threshold", c.cod_threshold).finish();

    {
        PhantomSpec& p = c.phantom;
        Section s(sub_table(root, "phantom", origin), "phantom", origin);
        s.get("seed", p.seed)
            .get("width", p.width)
            .get("height", p.height)
            .get("vessel_count", p.vessel_count)
            .get("specular_count", p.specular_count)
            .get("noise_sigma", p.noise_sigma)
            .get("animal_id", p.animal_id)
            .get("count", c.phantom_count)
            .field("sto2_field", p.sto2_field)
            .field("thb_field", p.thb_field)
            .field("offset_field", p.offset_field)
            .finish();
    }
    {
        SuiteSpec& s = c.suite;
        Section(sub_table(root, "suite", origin), "suite", origin)
            .get("train_acquisitions", s.train_acquisitions)
            .get("train_animals", s.train_animals)
            .get("test_acquisitions", s.test_acquisitions)
            .get("test_animals", s.test_animals)
            .get("width", s.width)
            .get("height", s.height)
            .finish();
    }
    {
        Section s(sub_table(root, "bundle", origin), "bundle", origin);
        s.get("n_spot", c.n_spot);
        if (s.has("r") || s.has("d")) {
            BundleSpec b;
            b.n_spot_target = c.n_spot;
            double radius = -1.0;
            s.get("r", b.r).get("d", b.d).get("bundle_radius", radius);
            if (radius > 0) b.bundle_radius = radius;
            c.custom_bundle = b;
        } else {
            double unused = 0.0;
            s.get("bundle_radius", unused);
            if (s.has("bundle_radius")) throw std::runtime_error(origin + ": bundle.bundle_radius needs explicit r and d");
        }
        s.finish();
    }
    Section(sub_table(root, "augment", origin), "augment", origin)
        .get("window", c.augment.window)
        .get("stride", c.augment.stride)
        .get("out_size", c.augment.out_size)
        .finish();
    Section(sub_table(root, "ablation", origin), "ablation", origin)
        .get("presets", c.presets)
        .get("seeds", c.seeds)
        .get("window", c.desk_augment.window)
        .get("stride", c.desk_augment.stride)
        .get("out_size", c.desk_augment.out_size)
        .get("max_steps", c.desk_steps)
        .finish();
    {
        gan::TrainConfig& t = c.train;
        double lr = t.adam_g.lr, b1 = t.adam_g.beta1, b2 = t.adam_g.beta2, eps = t.adam_g.eps;
        Section(sub_table(root, "train", origin), "train", origin)
            .get("batch_size", t.batch_size)
            .get("epochs", t.epochs)
            .get("max_steps", t.max_steps)
            .get("checkpoint_every", t.checkpoint_every)
            .get("eval_every", t.eval_every)
            .get("target_e_bar", t.target_e_bar)
            .get("mask_adversarial", t.mask_adversarial)
            .get("beta", t.loss.beta)
            .get("bce_clamp", t.loss.bce_clamp)
            .get("lr", lr)
            .get("beta1", b1)
            .get("beta2", b2)
            .get("adam_eps", eps)
            .finish();
        t.adam_g = t.adam_d = nn::AdamConfig{lr, b1, b2, eps};
    }
    {
        gan::GeneratorConfig& g = c.train.generator;
        Section(sub_table(root, "generator", origin), "generator", origin)
            .get("rgb_stem_channels", g.rgb_stem_channels)
            .get("shsi_stem_channels", g.shsi_stem_channels)
            .get("stem_kernel", g.stem_kernel)
            .get("downsamples", g.downsamples)
            .get("branch_blocks", g.branch_blocks)
            .get("fusion_channels", g.fusion_channels)
            .get("trunk_blocks", g.trunk_blocks)
            .get("init_std", g.init_std)
            .finish();
    }
    {
        gan::DiscriminatorConfig& d = c.train.discriminator;
        Section(sub_table(root, "discriminator", origin), "discriminator", origin)
            .get("channels", d.channels)
            .get("strides", d.strides)
            .get("kernel", d.kernel)
            .get("pad", d.pad)
            .get("slope", d.slope)
            .get("norm", d.norm)
            .get("init_std", d.init_std)
            .finish();
    }
    Section(sub_table(root, "metrics", origin), "metrics", origin)
        .get("ssim_window", c.ssim.window)
        .get("ssim_sigma", c.ssim.sigma)
        .get("ssim_k1", c.ssim.k1)
        .get("ssim_k2", c.ssim.k2)
        .get("dynamic_range", c.ssim.dynamic_range)
        .get("hap_threshold", c.hap_threshold)
        .finish();

    c.set_seed(c.seed);
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read config " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string default_config_toml() {
    const ExperimentConfig c;
    std::ostringstream os;
    os << "seed = " << c.seed << "\n"
       << "output_dir = \"" << c.output_dir << "\"\n\n"
       << "[oximetry]\n"
       << "cod_threshold = " << c.cod_threshold << "  # fits at or below this CoD are excluded\n\n"
       << "[phantom]\n"
       << "width = " << c.phantom.width << "\nheight = " << c.phantom.height << "\n"
       << "count = " << c.phantom_count << "\n"
       << "vessel_count = " << c.phantom.vessel_count << "\nspecular_count = " << c.phantom.specular_count << "\n"
       << "noise_sigma = " << c.phantom.noise_sigma << "\n\n"
       << "[suite]\n"
       << "train_acquisitions = " << c.suite.train_acquisitions << "\ntrain_animals = " << c.suite.train_animals << "\n"
       << "test_acquisitions = " << c.suite.test_acquisitions << "\ntest_animals = " << c.suite.test_animals << "\n"
       << "width = " << c.suite.width << "\nheight = " << c.suite.height << "\n\n"
       << "[bundle]\n"
       << "n_spot = " << c.n_spot << "  # 0, 121, 171 or 300; add r and d for a custom bundle\n\n"
       << "[augment]\n"
       << "window = " << c.augment.window << "\nstride = " << c.augment.stride << "\nout_size = " << c.augment.out_size
       << "\n\n"
       << "[ablation]\n"
       << "presets = [0, 121, 171, 300]\nseeds = [1, 2, 3]\n"
       << "window = " << c.desk_augment.window << "\nstride = " << c.desk_augment.stride
       << "\nout_size = " << c.desk_augment.out_size << "\nmax_steps = " << c.desk_steps << "\n\n"
       << "[train]\n"
       << "batch_size = " << c.train.batch_size << "\nepochs = " << c.train.epochs << "\n"
       << "max_steps = " << c.train.max_steps << "\ncheckpoint_every = " << c.train.checkpoint_every << "\n"
       << "eval_every = " << c.train.eval_every << "\ntarget_e_bar = " << c.train.target_e_bar << "\n"
       << "mask_adversarial = false\n"
       << "beta = " << c.train.loss.beta << "\n"
       << "lr = " << c.train.adam_g.lr << "\nbeta1 = " << c.train.adam_g.beta1 << "\nbeta2 = " << c.train.adam_g.beta2
       << "\n\n"
       << "[generator]\n"
       << "rgb_stem_channels = " << c.train.generator.rgb_stem_channels << "\n"
       << "shsi_stem_channels = " << c.train.generator.shsi_stem_channels << "\n"
       << "downsamples = " << c.train.generator.downsamples << "\n"
       << "branch_blocks = " << c.train.generator.branch_blocks << "\n"
       << "fusion_channels = " << c.train.generator.fusion_channels << "\n"
       << "trunk_blocks = " << c.train.generator.trunk_blocks << "\n\n"
       << "[discriminator]\n"
       << "channels = [64, 128, 256, 512]\nstrides = [2, 2, 2, 1]\nkernel = 4\nslope = 0.2\n\n"
       << "[metrics]\n"
       << "ssim_window = " << c.ssim.window << "\nssim_sigma = " << c.ssim.sigma << "\n"
       << "hap_threshold = " << c.hap_threshold << "\n";
    return os.str();
}

}  // namespace oxy
