#include "oxy/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oxy/nn/layers.hpp"
#include "oxy/nn/ops.hpp"
#include "oxy/random.hpp"

namespace oxy::nn {

GradCheckReport grad_check(const std::string& name, const std::vector<Var<double>>& inputs, const LossBuilder& loss,
                           const GradCheckOptions& opt) {
    for (const auto& x : inputs) x->zero_grad();
    {
        Tape<double> tape;
        auto l = loss(tape);
        tape.backward(l);
    }

    GradCheckReport report{name, 0.0, opt.tolerance, 0};
    Rng rng(opt.seed);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const auto& x = inputs[k];
        if (!x->requires_grad) continue;
        std::vector<std::size_t> coords(x->value.size());
        std::iota(coords.begin(), coords.end(), 0);
        if (coords.size() > opt.max_coords) {
            // partial Fisher-Yates keeps the sample deterministic under the seed
            for (std::size_t i = 0; i < opt.max_coords; ++i) {
                std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
            }
            coords.resize(opt.max_coords);
        }
        for (std::size_t i : coords) {
            const double saved = x->value[i];
            Tape<double> off(false);
            x->value[i] = saved + opt.eps;
            const double up = loss(off)->item();
            x->value[i] = saved - opt.eps;
            const double down = loss(off)->item();
            x->value[i] = saved;
            const double fd = (up - down) / (2 * opt.eps);
            const double g = x->grad[i];
            const double err = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), opt.floor});
            if (err > report.max_rel_error) {
                report.max_rel_error = err;
                report.worst_input = k;
                report.worst_element = i;
                report.worst_grad = g;
                report.worst_fd = fd;
            }
            ++report.coordinates;
        }
    }
    return report;
}

namespace {

Var<double> random_var(Rng& rng, Shape s, double scale = 1.0) {
    auto v = make_var<double>(s, true);
    for (double& x : v->value) x = scale * rng.normal();
    return v;
}

// keeps values out of the kink neighbourhood of piecewise-linear ops
Var<double> away_from_zero(Rng& rng, Shape s, double gap) {
    auto v = random_var(rng, s);
    for (double& x : v->value) x = x >= 0 ? x + gap : x - gap;
    return v;
}

std::vector<double> random_weights(Rng& rng, std::size_t n) {
    std::vector<double> w(n);
    for (double& x : w) x = rng.normal();
    return w;
}

// sum(op(...) * w) with w fixed, so every output element gets a distinct weight
LossBuilder projected(std::function<Var<double>(Tape<double>&)> op, std::shared_ptr<std::vector<double>> w) {
    return [op = std::move(op), w](Tape<double>& t) { return weighted_sum<double>(t, op(t), *w); };
}

std::shared_ptr<std::vector<double>> weights_for(Rng& rng, const std::function<Var<double>(Tape<double>&)>& op) {
    Tape<double> off(false);
    return std::make_shared<std::vector<double>>(random_weights(rng, op(off)->value.size()));
}

}  // namespace

std::vector<GradCheckReport> kernel_suite(std::uint64_t seed, double tolerance) {
    Rng rng(seed);
    GradCheckOptions opt;
    opt.tolerance = tolerance;
    opt.seed = mix_seed(seed, 1);
    std::vector<GradCheckReport> out;

    const auto check_op = [&](const std::string& name, const std::vector<Var<double>>& inputs,
                              std::function<Var<double>(Tape<double>&)> op) {
        auto w = weights_for(rng, op);
        out.push_back(grad_check(name, inputs, projected(std::move(op), w), opt));
    };

    {
        auto x = random_var(rng, {2, 3, 8, 8});
        auto w = random_var(rng, {4, 3, 3, 3}, 0.3);
        auto b = random_var(rng, {4, 1, 1, 1});
        check_op("conv2d k3 s1 p1", {x, w, b}, [=](Tape<double>& t) { return conv2d(t, x, w, b, 1, 1); });
        auto w4 = random_var(rng, {5, 3, 4, 4}, 0.3);
        check_op("conv2d k4 s2 p1", {x, w4}, [=](Tape<double>& t) { return conv2d<double>(t, x, w4, nullptr, 2, 1); });
    }
    {
        auto x = random_var(rng, {2, 4, 5, 5});
        auto w = random_var(rng, {4, 3, 4, 4}, 0.3);
        auto b = random_var(rng, {3, 1, 1, 1});
        check_op("conv_transpose2d k4 s2 p1", {x, w, b},
                 [=](Tape<double>& t) { return conv_transpose2d(t, x, w, b, 2, 1); });
    }
    {
        auto x = random_var(rng, {2, 3, 6, 5});
        auto scale = random_var(rng, {3, 1, 1, 1});
        auto shift = random_var(rng, {3, 1, 1, 1});
        check_op("instance_norm", {x, scale, shift},
                 [=](Tape<double>& t) { return instance_norm(t, x, scale, shift, 1e-5); });
    }
    {
        auto x = away_from_zero(rng, {2, 3, 4, 4}, 1e-2);
        check_op("relu", {x}, [=](Tape<double>& t) { return relu(t, x); });
        check_op("leaky_relu", {x}, [=](Tape<double>& t) { return leaky_relu(t, x, 0.2); });
        auto y = random_var(rng, {2, 3, 4, 4});
        check_op("tanh", {y}, [=](Tape<double>& t) { return tanh(t, y); });
        check_op("sigmoid", {y}, [=](Tape<double>& t) { return sigmoid(t, y); });
        check_op("scale", {y}, [=](Tape<double>& t) { return scale(t, y, 2.5); });
        // shared input: both paths must accumulate into y's gradient
        check_op("add (shared input)", {y}, [=](Tape<double>& t) { return add(t, tanh(t, y), sigmoid(t, y)); });
    }
    {
        auto a = random_var(rng, {2, 3, 4, 4});
        auto b = random_var(rng, {2, 5, 4, 4});
        check_op("concat_channels", {a, b}, [=](Tape<double>& t) { return concat_channels(t, a, b); });
    }
    {
        ParameterFactory<double> factory(mix_seed(seed, 2), 0.3);
        auto block = factory.residual("block", 3);
        std::vector<Parameter<double>*> params;
        collect(params, block);
        auto x = random_var(rng, {1, 3, 6, 6});
        std::vector<Var<double>> inputs{x};
        for (auto* p : params) {
            for (double& v : p->tensor->value) v += 0.1 * rng.normal();
            inputs.push_back(p->tensor);
        }
        check_op("residual_block", inputs, [=](Tape<double>& t) { return block(t, x); });
    }
    {
        auto pred = random_var(rng, {1, 1, 6, 6});
        auto target = make_var<double>(pred->shape);
        std::vector<std::uint8_t> keep(pred->value.size());
        for (std::size_t i = 0; i < keep.size(); ++i) {
            keep[i] = rng.uniform() < 0.6;
            target->value[i] = pred->value[i] + (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.05, 1.0);
        }
        auto k = std::make_shared<std::vector<std::uint8_t>>(std::move(keep));
        out.push_back(grad_check("masked_mean_abs", {pred},
                                 [=](Tape<double>& t) { return masked_mean_abs<double>(t, pred, target, *k); }, opt));
    }
    {
        auto p = make_var<double>({1, 1, 5, 5}, true);
        for (double& v : p->value) v = rng.uniform(0.1, 0.9);
        out.push_back(grad_check("bce_mean label 1", {p}, [=](Tape<double>& t) { return bce_mean(t, p, 1.0); }, opt));
        out.push_back(grad_check("bce_mean label 0", {p}, [=](Tape<double>& t) { return bce_mean(t, p, 0.0); }, opt));
    }
    return out;
}

}  // namespace oxy::nn
