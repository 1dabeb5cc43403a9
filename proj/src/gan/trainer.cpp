#include "oxy/gan/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "oxy/config.hpp"
#include "oxy/metrics.hpp"
#include "oxy/random.hpp"

namespace oxy::gan {

namespace {

using Clock = std::chrono::steady_clock;

struct Batch {
    nn::Var<float> rgb;
    nn::Var<float> shsi;
    nn::Var<float> target;
    std::vector<std::uint8_t> include;
};

void copy_plane(const Raster& r, float* dst) {
    for (std::size_t i = 0; i < r.data.size(); ++i) dst[i] = std::isnan(r.data[i]) ? 0.0f : r.data[i];
}

Batch pack(const std::vector<const Sample*>& samples) {
    if (samples.empty()) throw std::invalid_argument("empty batch");
    const Sample& first = *samples.front();
    const int n = static_cast<int>(samples.size());
    const int h = first.rgb.height, w = first.rgb.width;
    Batch b;
    b.rgb = nn::make_var<float>({n, first.rgb.channels, h, w});
    b.shsi = nn::make_var<float>({n, first.shsi.channels, h, w});
    b.target = nn::make_var<float>({n, 1, h, w});
    b.include.reserve(static_cast<std::size_t>(n) * h * w);
    for (int i = 0; i < n; ++i) {
        const Sample& s = *samples[i];
        if (s.rgb.width != w || s.rgb.height != h || s.shsi.width != w || s.shsi.height != h || s.target.width != w ||
            s.target.height != h || s.mask.width != w || s.mask.height != h || s.target.channels != 1 ||
            s.rgb.channels != first.rgb.channels || s.shsi.channels != first.shsi.channels) {
            throw std::invalid_argument("batch samples differ in shape");
        }
        copy_plane(s.rgb, b.rgb->value.data() + i * s.rgb.data.size());
        copy_plane(s.shsi, b.shsi->value.data() + i * s.shsi.data.size());
        copy_plane(s.target, b.target->value.data() + i * s.target.data.size());
        for (MaskCode c : s.mask.codes) b.include.push_back(c == MaskCode::effective);
    }
    return b;
}

void set_trainable(const std::vector<nn::Parameter<float>*>& params, bool on) {
    for (auto* p : params) p->tensor->requires_grad = on;
}

void check_finite(double v, const char* what, std::int64_t step) {
    if (!std::isfinite(v)) {
        throw std::runtime_error(std::string("non-finite ") + what + " at step " + std::to_string(step));
    }
}

}  // namespace

void TrainConfig::validate() const {
    generator.validate();
    discriminator.validate();
    loss.validate();
    adam_g.validate();
    adam_d.validate();
    if (discriminator.in_channels != generator.rgb_channels + generator.shsi_channels + generator.out_channels) {
        throw std::invalid_argument("discriminator input channels must equal rgb + shsi + output channels");
    }
    if (batch_size < 1 || epochs < 0 || max_steps < 0 || checkpoint_every < 0 || eval_every < 0 || target_e_bar < 0) {
        throw std::invalid_argument("invalid training schedule");
    }
}

SampleSource SampleSource::from(std::vector<Sample> samples) {
    auto shared = std::make_shared<std::vector<Sample>>(std::move(samples));
    return {shared->size(), [shared](std::size_t i) { return shared->at(i); }};
}

StO2Map truth_map(const Sample& sample) {
    StO2Map m(sample.target.width, sample.target.height);
    m.mask = sample.mask;
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        const float v = sample.target.data[i];
        m.values[i] = (m.mask.codes[i] == MaskCode::effective && std::isfinite(v)) ? v : 0.0f;
    }
    return m;
}

Prediction infer(const Generator<float>& g, const Sample& sample) {
    const auto t0 = Clock::now();
    Batch b = pack({&sample});
    nn::Tape<float> off(false);
    auto y = g.forward(off, b.rgb, b.shsi);
    Prediction p;
    p.map = StO2Map(sample.rgb.width, sample.rgb.height);
    p.map.values = y->value;
    p.map.mask = sample.mask;
    p.milliseconds = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    return p;
}

double mean_e_bar(const Generator<float>& g, const SampleSource& source) {
    if (source.size == 0) throw std::invalid_argument("mean_e_bar over an empty sample set");
    double sum = 0.0;
    for (std::size_t i = 0; i < source.size; ++i) {
        const Sample s = source.get(i);
        sum += mean_prediction_error(infer(g, s).map, truth_map(s));
    }
    return sum / static_cast<double>(source.size);
}

std::unique_ptr<Generator<float>> load_generator(const std::filesystem::path& checkpoint) {
    const auto ck = nn::Checkpoint::load(checkpoint);
    const auto it = ck.meta.find("generator_config");
    if (it == ck.meta.end()) throw std::runtime_error(checkpoint.string() + ": checkpoint lacks a generator config");
    GeneratorConfig cfg = nlohmann::json::parse(it->second).get<GeneratorConfig>();
    auto g = std::make_unique<Generator<float>>(cfg, 0);
    nn::import_parameters(ck, g->parameters());
    return g;
}

Trainer::Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    g_ = std::make_unique<Generator<float>>(cfg_.generator, mix_seed(cfg_.seed, 101));
    d_ = std::make_unique<Discriminator<float>>(cfg_.discriminator, mix_seed(cfg_.seed, 202));
    g_params_ = g_->parameters();
    d_params_ = d_->parameters();
    opt_g_ = std::make_unique<nn::Adam<float>>(g_params_, cfg_.adam_g);
    opt_d_ = std::make_unique<nn::Adam<float>>(d_params_, cfg_.adam_d);
}

LossRecord Trainer::step(const std::vector<const Sample*>& samples) {
    Batch b = pack(samples);
    const std::vector<nn::Var<float>> cond{b.rgb, b.shsi};

    // generator forward, kept on its tape for the generator step
    nn::Tape<float> g_tape;
    auto fake = g_->forward(g_tape, b.rgb, b.shsi);
    auto real_in = b.target;
    auto fake_in = fake;
    if (cfg_.mask_adversarial) {
        nn::Tape<float> off(false);
        real_in = nn::keep_where<float>(off, b.target, b.include);
        fake_in = nn::keep_where<float>(g_tape, fake, b.include);
    }

    LossRecord rec;
    rec.step = step_ + 1;

    // discriminator step on detached output
    {
        opt_d_->zero_grad();
        nn::Tape<float> d_tape;
        auto real_scores = d_->forward(d_tape, cond, real_in);
        auto fake_scores = d_->forward(d_tape, cond, nn::detach(fake_in));
        auto loss_d = discriminator_loss(d_tape, real_scores, fake_scores, cfg_.loss);
        rec.loss_d = loss_d->item();
        check_finite(rec.loss_d, "discriminator loss", rec.step);
        d_tape.backward(loss_d);
        opt_d_->step();
    }

    // generator step through the updated, frozen discriminator
    {
        opt_g_->zero_grad();
        set_trainable(d_params_, false);
        try {
            auto fake_scores = d_->forward(g_tape, cond, fake_in);
            auto loss_g = generator_loss<float>(g_tape, fake_scores, fake, b.target, b.include, cfg_.loss);
            rec.loss_g = loss_g.total->item();
            rec.l1 = loss_g.l1->item();
            rec.adv = loss_g.adversarial->item();
            check_finite(rec.loss_g, "generator loss", rec.step);
            g_tape.backward(loss_g.total);
        } catch (...) {
            set_trainable(d_params_, true);
            throw;
        }
        set_trainable(d_params_, true);
        opt_g_->step();
    }

    ++step_;
    history_.push_back(rec);
    return rec;
}

std::vector<std::size_t> Trainer::epoch_order(std::size_t n, std::int64_t epoch) const {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(mix_seed(cfg_.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    return order;
}

TrainResult Trainer::fit(const SampleSource& train, const std::filesystem::path& out_dir,
                         const std::function<void(const LossRecord&)>& on_step) {
    if (train.size == 0) throw std::invalid_argument("training split is empty");
    const auto t0 = Clock::now();
    const std::size_t batch = static_cast<std::size_t>(cfg_.batch_size);
    const std::int64_t per_epoch = static_cast<std::int64_t>((train.size + batch - 1) / batch);
    const std::int64_t total = cfg_.max_steps > 0 ? cfg_.max_steps : per_epoch * cfg_.epochs;
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    TrainResult result;
    std::int64_t cached_epoch = -1;
    std::vector<std::size_t> order;
    while (step_ < total) {
        const std::int64_t epoch = step_ / per_epoch;
        if (epoch != cached_epoch) {
            order = epoch_order(train.size, epoch);
            cached_epoch = epoch;
        }
        const std::size_t begin = static_cast<std::size_t>(step_ % per_epoch) * batch;
        const std::size_t end = std::min(begin + batch, train.size);
        std::vector<Sample> samples;
        samples.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) samples.push_back(train.get(order[i]));
        std::vector<const Sample*> ptrs;
        for (const auto& s : samples) ptrs.push_back(&s);

        const LossRecord rec = step(ptrs);
        if (on_step) on_step(rec);

        if (!out_dir.empty() && cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0) {
            save(out_dir / ("checkpoint_" + std::to_string(step_) + ".oxck"));
        }
        if (cfg_.eval_every > 0 && (step_ % cfg_.eval_every == 0 || step_ == total)) {
            result.last_probe_e_bar = mean_e_bar(*g_, train);
            if (cfg_.target_e_bar > 0 && result.last_probe_e_bar < cfg_.target_e_bar) {
                result.early_stopped = true;
                break;
            }
        }
    }
    result.steps = step_;
    result.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (!out_dir.empty()) {
        save(out_dir / "checkpoint_final.oxck");
        write_loss_csv(out_dir / "loss.csv");
    }
    return result;
}

void Trainer::save(const std::filesystem::path& path) const {
    nn::Checkpoint ck;
    nn::export_parameters(g_params_, ck);
    nn::export_parameters(d_params_, ck);
    nn::export_optimizer(*opt_g_, "adam_g/", ck);
    nn::export_optimizer(*opt_d_, "adam_d/", ck);
    ck.meta["generator_config"] = nlohmann::json(cfg_.generator).dump();
    ck.meta["train_config"] = nlohmann::json(cfg_).dump();
    ck.meta["step"] = std::to_string(step_);
    ck.meta["seed"] = std::to_string(cfg_.seed);
    std::ostringstream hist;
    hist.precision(17);
    for (const auto& r : history_) hist << r.step << ',' << r.loss_d << ',' << r.loss_g << ',' << r.l1 << ',' << r.adv << '\n';
    ck.meta["loss_history"] = hist.str();
    ck.save(path);
}

void Trainer::load(const std::filesystem::path& path) {
    const auto ck = nn::Checkpoint::load(path);
    const auto it = ck.meta.find("generator_config");
    if (it == ck.meta.end() || nlohmann::json::parse(it->second) != nlohmann::json(cfg_.generator)) {
        throw std::runtime_error(path.string() + ": checkpoint/config mismatch (generator)");
    }
    nn::import_parameters(ck, g_params_);
    nn::import_parameters(ck, d_params_);
    nn::import_optimizer(ck, "adam_g/", *opt_g_);
    nn::import_optimizer(ck, "adam_d/", *opt_d_);
    step_ = std::stoll(ck.meta.at("step"));
    history_.clear();
    std::istringstream hist(ck.meta.at("loss_history"));
    std::string line;
    while (std::getline(hist, line)) {
        LossRecord r;
        char c;
        std::istringstream ls(line);
        ls >> r.step >> c >> r.loss_d >> c >> r.loss_g >> c >> r.l1 >> c >> r.adv;
        if (!ls) throw std::runtime_error(path.string() + ": malformed loss history");
        history_.push_back(r);
    }
}

void Trainer::write_loss_csv(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os.precision(9);
    os << "step,loss_D,loss_G,l1_term,adv_term\n";
    for (const auto& r : history_) os << r.step << ',' << r.loss_d << ',' << r.loss_g << ',' << r.l1 << ',' << r.adv << '\n';
}

}  // namespace oxy::gan
