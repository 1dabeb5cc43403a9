#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include "oxy/dataset.hpp"
#include "oxy/gan/discriminator.hpp"
#include "oxy/gan/generator.hpp"
#include "oxy/gan/loss.hpp"
#include "oxy/nn/adam.hpp"
#include "oxy/nn/checkpoint.hpp"

namespace oxy::gan {

struct TrainConfig {
    GeneratorConfig generator;
    DiscriminatorConfig discriminator;
    LossWeights loss;
    nn::AdamConfig adam_g;
    nn::AdamConfig adam_d;
    int batch_size = 1;
    int epochs = 1;
    std::int64_t max_steps = 0;        // overrides epochs when positive
    std::int64_t checkpoint_every = 0; // 0: only the final checkpoint
    std::int64_t eval_every = 0;       // training-set e_bar probe interval; 0 disables
    double target_e_bar = 0.0;         // stop once the probe falls below this; 0 disables
    bool mask_adversarial = false;     // also hide excluded pixels from the discriminator
    std::uint64_t seed = 1;

    void validate() const;
};

/// Random access to training samples, so large augmented sets can be
/// materialised on demand.
struct SampleSource {
    std::size_t size = 0;
    std::function<Sample(std::size_t)> get;

    static SampleSource from(std::vector<Sample> samples);
};

struct LossRecord {
    std::int64_t step = 0;
    double loss_d = 0.0;
    double loss_g = 0.0;
    double l1 = 0.0;
    double adv = 0.0;
};

struct TrainResult {
    std::int64_t steps = 0;
    bool early_stopped = false;
    double last_probe_e_bar = -1.0;  // -1 when never probed
    double seconds = 0.0;
};

/// Prediction from one generator forward pass, packaged with the input mask.
struct Prediction {
    StO2Map map;
    double milliseconds = 0.0;
};

Prediction infer(const Generator<float>& g, const Sample& sample);
/// Ground truth of a sample as a map (values where effective, mask as given).
StO2Map truth_map(const Sample& sample);
/// Mean e_bar of the generator over every sample of the source.
double mean_e_bar(const Generator<float>& g, const SampleSource& source);

/// Generator restored from a checkpoint written by Trainer::save.
std::unique_ptr<Generator<float>> load_generator(const std::filesystem::path& checkpoint);

class Trainer {
public:
    explicit Trainer(TrainConfig cfg);

    /// One discriminator step on detached generator output, then one generator step.
    LossRecord step(const std::vector<const Sample*>& batch);

    /// Runs to the configured step budget in seeded epoch order. With a
    /// non-empty out_dir, writes loss.csv and checkpoints there.
    TrainResult fit(const SampleSource& train, const std::filesystem::path& out_dir = {},
                    const std::function<void(const LossRecord&)>& on_step = {});

    /// Permutation of [0, n) used for the given epoch.
    std::vector<std::size_t> epoch_order(std::size_t n, std::int64_t epoch) const;

    void save(const std::filesystem::path& path) const;
    /// Restores parameters, optimizer moments, step counter and loss history.
    void load(const std::filesystem::path& path);
    void write_loss_csv(const std::filesystem::path& path) const;

    const TrainConfig& config() const { return cfg_; }
    Generator<float>& generator() { return *g_; }
    Discriminator<float>& discriminator() { return *d_; }
    const std::vector<LossRecord>& history() const { return history_; }
    std::int64_t steps_done() const { return step_; }

private:
    TrainConfig cfg_;
    std::unique_ptr<Generator<float>> g_;
    std::unique_ptr<Discriminator<float>> d_;
    std::vector<nn::Parameter<float>*> g_params_;
    std::vector<nn::Parameter<float>*> d_params_;
    std::unique_ptr<nn::Adam<float>> opt_g_;
    std::unique_ptr<nn::Adam<float>> opt_d_;
    std::int64_t step_ = 0;
    std::vector<LossRecord> history_;
};

}  // namespace oxy::gan
