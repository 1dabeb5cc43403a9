#include "oxy/gan/gradcheck.hpp"

#include "oxy/random.hpp"

namespace oxy::gan {

namespace {

struct Inputs {
    nn::Var<double> rgb;
    nn::Var<double> shsi;
    nn::Var<double> target;
    std::shared_ptr<std::vector<std::uint8_t>> include;
};

Inputs random_inputs(const GeneratorConfig& cfg, int size, Rng& rng) {
    Inputs in;
    in.rgb = nn::make_var<double>({1, cfg.rgb_channels, size, size});
    in.shsi = nn::make_var<double>({1, cfg.shsi_channels, size, size});
    in.target = nn::make_var<double>({1, 1, size, size});
    for (double& v : in.rgb->value) v = rng.uniform();
    // sparse spectra: a few lit pixels, zeros elsewhere
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    for (std::size_t p = 0; p < plane; ++p) {
        if (rng.uniform() >= 0.2) continue;
        for (int c = 0; c < cfg.shsi_channels; ++c) in.shsi->value[c * plane + p] = rng.uniform();
    }
    for (double& v : in.target->value) v = rng.uniform(0.2, 0.9);
    in.include = std::make_shared<std::vector<std::uint8_t>>(plane);
    for (auto& m : *in.include) m = rng.uniform() >= 1.0 / 3.0;
    return in;
}

// target on a random side of the prediction, 0.05 to 0.3 away, so no
// stencil step reaches the kink of |y_hat - y| (targets may leave [0, 1])
void target_off_kink(Inputs& in, const Generator<double>& g, Rng& rng) {
    nn::Tape<double> off(false);
    const auto y = g.forward(off, in.rgb, in.shsi);
    for (std::size_t i = 0; i < y->value.size(); ++i) {
        const double gap = rng.uniform(0.05, 0.3);
        in.target->value[i] = y->value[i] + (rng.uniform() < 0.5 ? -gap : gap);
    }
}

std::vector<nn::Var<double>> tensors(const std::vector<nn::Parameter<double>*>& params) {
    std::vector<nn::Var<double>> out;
    for (auto* p : params) out.push_back(p->tensor);
    return out;
}

}  // namespace

nn::GradCheckReport generator_l1_check(const GeneratorConfig& cfg, int size, std::uint64_t seed, double tolerance,
                                       std::size_t coords_per_tensor) {
    Rng rng(seed);
    auto g = std::make_shared<Generator<double>>(cfg, mix_seed(seed, 1));
    Inputs in = random_inputs(cfg, size, rng);
    target_off_kink(in, *g, rng);
    LossWeights w;
    nn::GradCheckOptions opt;
    // ReLU kinks inside the network still bound the step from above; below it
    // the |L| ~ 80 roundoff grows as 1/eps. Some shifts have an exactly zero
    // gradient (a constant the next instance norm removes), hence the floor.
    opt.eps = 2e-7;
    opt.floor = 1e-3;
    opt.tolerance = tolerance;
    opt.max_coords = coords_per_tensor;
    opt.seed = mix_seed(seed, 2);
    return nn::grad_check(
        "generator beta*L1 " + std::to_string(size) + "x" + std::to_string(size), tensors(g->parameters()),
        [g, in, w](nn::Tape<double>& t) {
            auto y = g->forward(t, in.rgb, in.shsi);
            return nn::scale(t, masked_l1<double>(t, y, in.target, *in.include), w.beta);
        },
        opt);
}

nn::GradCheckReport generator_objective_check(const GeneratorConfig& gcfg, const DiscriminatorConfig& dcfg, int size,
                                              std::uint64_t seed, double tolerance, std::size_t coords_per_tensor) {
    Rng rng(seed);
    auto g = std::make_shared<Generator<double>>(gcfg, mix_seed(seed, 1));
    auto d = std::make_shared<Discriminator<double>>(dcfg, mix_seed(seed, 3));
    Inputs in = random_inputs(gcfg, size, rng);
    target_off_kink(in, *g, rng);
    LossWeights w;
    nn::GradCheckOptions opt;
    opt.eps = 2e-7;
    opt.floor = 1e-3;
    opt.tolerance = tolerance;
    opt.max_coords = coords_per_tensor;
    opt.seed = mix_seed(seed, 2);
    // the discriminator is held fixed, as in a generator step
    for (auto* p : d->parameters()) p->tensor->requires_grad = false;
    return nn::grad_check(
        "generator objective " + std::to_string(size) + "x" + std::to_string(size), tensors(g->parameters()),
        [g, d, in, w](nn::Tape<double>& t) {
            auto y = g->forward(t, in.rgb, in.shsi);
            auto scores = d->forward(t, {in.rgb, in.shsi}, y);
            return generator_loss<double>(t, scores, y, in.target, *in.include, w).total;
        },
        opt);
}

}  // namespace oxy::gan
