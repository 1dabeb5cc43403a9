#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include "oxy/nn/adam.hpp"
#include "oxy/nn/checkpoint.hpp"
#include "oxy/nn/gradcheck.hpp"
#include "oxy/nn/kernels.hpp"
#include "oxy/nn/layers.hpp"
#include "oxy/nn/ops.hpp"
#include "support.hpp"

using namespace oxy::nn;

namespace {

template <class T>
std::vector<T> noise(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(d(rng));
    return v;
}

template <class T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    return m;
}

struct KernelPathGuard {
    KernelPath saved = kernel_path();
    ~KernelPathGuard() { set_kernel_path(saved); }
};

const ConvGeometry geometries[] = {
    {2, 3, 9, 7, 4, 3, 1, 1},
    {1, 5, 16, 16, 6, 4, 2, 1},
    {1, 2, 8, 8, 3, 7, 1, 3},
    {3, 4, 5, 6, 2, 1, 1, 0},
    {1, 3, 11, 11, 2, 3, 3, 0},
};

}  // namespace

TEST_CASE_TEMPLATE("parallel conv kernels agree with the serial reference", T, float, double) {
    const double tol = std::is_same_v<T, float> ? 1e-4 : 1e-11;
    for (const auto& g : geometries) {
        CAPTURE(g.k);
        CAPTURE(g.stride);
        const auto x = noise<T>(g.in_size(), 1), w = noise<T>(g.weight_size(), 2), b = noise<T>(g.c_out, 3);
        const auto dy = noise<T>(g.out_size(), 4);
        std::vector<T> y1(g.out_size()), y2(g.out_size());
        kernels::reference::conv2d_forward(g, x.data(), w.data(), b.data(), y1.data());
        kernels::parallel::conv2d_forward(g, x.data(), w.data(), b.data(), y2.data());
        CHECK(max_abs_diff(y1, y2) < tol);

        // backward kernels accumulate, so start both from the same non-zero buffer
        std::vector<T> dx1 = noise<T>(g.in_size(), 5), dx2 = dx1;
        kernels::reference::conv2d_backward_input(g, w.data(), dy.data(), dx1.data());
        kernels::parallel::conv2d_backward_input(g, w.data(), dy.data(), dx2.data());
        CHECK(max_abs_diff(dx1, dx2) < tol);

        std::vector<T> dw1 = noise<T>(g.weight_size(), 6), dw2 = dw1, db1(g.c_out, T(1)), db2 = db1;
        kernels::reference::conv2d_backward_weight(g, x.data(), dy.data(), dw1.data(), db1.data());
        kernels::parallel::conv2d_backward_weight(g, x.data(), dy.data(), dw2.data(), db2.data());
        CHECK(max_abs_diff(dw1, dw2) < tol * 10);
        CHECK(max_abs_diff(db1, db2) < tol * 10);
    }
}

TEST_CASE_TEMPLATE("parallel instance norm agrees with the serial reference", T, float, double) {
    const double tol = std::is_same_v<T, float> ? 1e-4 : 1e-11;
    const NormGeometry g{2, 5, 37};
    const std::size_t n = 2 * 5 * 37;
    const auto x = noise<T>(n, 7), dy = noise<T>(n, 8), scale = noise<T>(5, 9), shift = noise<T>(5, 10);
    std::vector<T> y1(n), y2(n), xh1(n), xh2(n), is1(10), is2(10);
    kernels::reference::instance_norm_forward(g, x.data(), scale.data(), shift.data(), T(1e-5), y1.data(), xh1.data(), is1.data());
    kernels::parallel::instance_norm_forward(g, x.data(), scale.data(), shift.data(), T(1e-5), y2.data(), xh2.data(), is2.data());
    CHECK(max_abs_diff(y1, y2) < tol);
    CHECK(max_abs_diff(is1, is2) < tol);
    std::vector<T> dx1(n, T(0)), dx2(n, T(0)), ds1(5, T(0)), ds2(5, T(0)), dh1(5, T(0)), dh2(5, T(0));
    kernels::reference::instance_norm_backward(g, xh1.data(), is1.data(), scale.data(), dy.data(), dx1.data(), ds1.data(), dh1.data());
    kernels::parallel::instance_norm_backward(g, xh2.data(), is2.data(), scale.data(), dy.data(), dx2.data(), ds2.data(), dh2.data());
    CHECK(max_abs_diff(dx1, dx2) < tol);
    CHECK(max_abs_diff(ds1, ds2) < tol);
    CHECK(max_abs_diff(dh1, dh2) < tol);
    // each normalised slice has zero mean and unit variance
    for (int s = 0; s < 10; ++s) {
        double m = 0, v = 0;
        for (int i = 0; i < 37; ++i) m += xh1[s * 37 + i];
        m /= 37;
        for (int i = 0; i < 37; ++i) v += (xh1[s * 37 + i] - m) * (xh1[s * 37 + i] - m);
        CHECK(std::abs(m) < 1e-5);
        CHECK(v / 37 == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("conv forward matches a hand-computed case") {
    // 1x1x3x3 input, 2x2 all-ones kernel, stride 1, no pad: window sums
    const ConvGeometry g{1, 1, 3, 3, 1, 2, 1, 0};
    const double x[9] = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    const double w[4] = {1, 1, 1, 1};
    const double b[1] = {0.5};
    double y[4];
    kernels::reference::conv2d_forward(g, x, w, b, y);
    CHECK(y[0] == 12.5);
    CHECK(y[1] == 16.5);
    CHECK(y[2] == 24.5);
    CHECK(y[3] == 28.5);
    CHECK_THROWS((ConvGeometry{1, 1, 2, 2, 1, 5, 1, 0}.validate()));
}

TEST_CASE("transposed convolution is the adjoint of convolution") {
    Tape<double> off(false);
    for (const auto& g : geometries) {
        if (g.n != 1) continue;
        // convT only restores the full input when the stride divides evenly
        if ((g.h + 2 * g.pad - g.k) % g.stride || (g.w + 2 * g.pad - g.k) % g.stride) continue;
        auto x = make_var<double>({1, g.c_in, g.h, g.w}, noise<double>(g.in_size(), 11));
        auto w = make_var<double>({g.c_out, g.c_in, g.k, g.k}, noise<double>(g.weight_size(), 12));
        auto y = make_var<double>({1, g.c_out, g.out_h(), g.out_w()}, noise<double>(g.out_size(), 13));
        const auto ax = conv2d<double>(off, x, w, nullptr, g.stride, g.pad);
        // convT weight is laid out [c_in of convT][c_out of convT][k][k], i.e. the conv weight itself
        const auto aty = conv_transpose2d<double>(off, y, w, nullptr, g.stride, g.pad);
        REQUIRE(aty->shape.h == g.h);
        REQUIRE(aty->shape.w == g.w);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < ax->value.size(); ++i) lhs += ax->value[i] * y->value[i];
        for (int c = 0; c < g.c_in; ++c)
            for (int r = 0; r < g.h; ++r)
                for (int q = 0; q < g.w; ++q)
                    rhs += x->value[(c * g.h + r) * g.w + q] * aty->value[(c * aty->shape.h + r) * aty->shape.w + q];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
}

TEST_CASE("tape: gradients, detachment and inference mode") {
    Tape<double> t;
    auto a = make_var<double>({1, 1, 1, 3}, {1.0, -2.0, 3.0}, true);
    auto b = make_var<double>({1, 1, 1, 3}, {0.5, 0.5, 0.5}, true);
    auto s = add(t, a, scale(t, b, 2.0));
    const std::vector<double> w{1.0, 2.0, 3.0};
    auto l = weighted_sum<double>(t, relu(t, s), w);
    t.backward(l);
    CHECK(a->grad == std::vector<double>{1.0, 0.0, 3.0});
    CHECK(b->grad == std::vector<double>{2.0, 0.0, 6.0});

    // detached copies carry no gradient back
    Tape<double> t2;
    a->zero_grad();
    auto d = detach(a);
    CHECK_FALSE(d->requires_grad);
    auto l2 = weighted_sum<double>(t2, scale(t2, d, 3.0), w);
    CHECK_FALSE(l2->requires_grad);
    CHECK(t2.size() == 0);
    CHECK(a->grad == std::vector<double>{0.0, 0.0, 0.0});

    Tape<double> off(false);
    auto l3 = weighted_sum<double>(off, scale(off, a, 3.0), w);
    CHECK(off.size() == 0);
    CHECK_FALSE(l3->requires_grad);
    CHECK(l3->item() == doctest::Approx(3.0 * (1.0 - 4.0 + 9.0)));
}

TEST_CASE("op shape contracts and errors") {
    Tape<double> t;
    auto x = make_var<double>({1, 2, 8, 8}, true, 0.1);
    auto w = make_var<double>({4, 2, 4, 4}, true, 0.1);
    CHECK(conv2d<double>(t, x, w, nullptr, 2, 1)->shape == Shape{1, 4, 4, 4});
    auto wt = make_var<double>({2, 3, 4, 4}, true, 0.1);
    CHECK(conv_transpose2d<double>(t, x, wt, nullptr, 2, 1)->shape == Shape{1, 3, 16, 16});
    auto bad = make_var<double>({4, 3, 4, 4}, true);
    CHECK_THROWS(conv2d<double>(t, x, bad, nullptr, 1, 0));
    auto y = make_var<double>({1, 3, 8, 8});
    CHECK(concat_channels(t, x, y)->shape == Shape{1, 5, 8, 8});
    CHECK_THROWS(concat_channels(t, x, make_var<double>({1, 3, 4, 8})));
    CHECK_THROWS(add(t, x, y));
    auto one = make_var<double>({1, 2, 1, 1});
    CHECK_THROWS(instance_norm<double>(t, one, make_var<double>({2, 1, 1, 1}, false, 1.0), make_var<double>({2, 1, 1, 1})));
}

TEST_CASE("sigmoid is stable and bce hits its closed form") {
    Tape<double> off(false);
    auto x = make_var<double>({1, 1, 1, 3}, {-800.0, 0.0, 800.0});
    auto s = sigmoid(off, x);
    CHECK(s->value[0] == doctest::Approx(0.0));
    CHECK(s->value[1] == 0.5);
    CHECK(s->value[2] == doctest::Approx(1.0));
    for (double v : s->value) CHECK(std::isfinite(v));
    auto half = make_var<double>({1, 1, 4, 4}, false, 0.5);
    CHECK(bce_mean(off, half, 1.0)->item() == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
    CHECK(bce_mean(off, half, 0.0)->item() == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
    auto zero = make_var<double>({1, 1, 1, 1}, false, 0.0);
    CHECK(bce_mean(off, zero, 1.0, 1e-7)->item() == doctest::Approx(-std::log(1e-7)));
}

TEST_CASE("masked mean abs: excluded pixels give no loss and no gradient") {
    Tape<double> t;
    auto p = make_var<double>({1, 1, 1, 4}, {0.2, 0.9, 0.4, 0.1}, true);
    auto y = make_var<double>({1, 1, 1, 4}, {0.3, 0.1, 0.4, 0.6});
    const std::vector<std::uint8_t> inc{1, 0, 1, 1};
    auto l = masked_mean_abs<double>(t, p, y, inc);
    CHECK(l->item() == doctest::Approx((0.1 + 0.0 + 0.5) / 3));
    t.backward(l);
    CHECK(p->grad[1] == 0.0);
    CHECK(p->grad[0] == doctest::Approx(-1.0 / 3));
    CHECK(p->grad[3] == doctest::Approx(-1.0 / 3));

    Tape<double> t2;
    auto k = keep_where<double>(t2, p, inc);
    CHECK(k->value[1] == 0.0);
    t2.backward(weighted_sum<double>(t2, k, std::vector<double>{1, 1, 1, 1}));
}

TEST_CASE("kernel gradient suite passes on both kernel paths") {
    KernelPathGuard guard;
    for (auto path : {KernelPath::parallel, KernelPath::reference}) {
        set_kernel_path(path);
        for (const auto& r : kernel_suite(17)) {
            CAPTURE(r.name);
            CAPTURE(r.max_rel_error);
            CHECK(r.coordinates > 0);
            CHECK(r.passed());
        }
    }
}

TEST_CASE("gradient check catches a wrong gradient") {
    // an op whose backward is deliberately off by a factor of two
    auto x = make_var<double>({1, 1, 1, 3}, {0.1, 0.2, 0.3}, true);
    const LossBuilder wrong = [x](Tape<double>& t) {
        auto y = make_var<double>(x->shape, x->value, t.enabled());
        for (auto& v : y->value) v = v * v;
        t.record([x, y] {
            for (std::size_t i = 0; i < 3; ++i) x->grad[i] += 4.0 * x->value[i] * y->grad[i];
        });
        return weighted_sum<double>(t, y, std::vector<double>{1, 1, 1});
    };
    const auto r = grad_check("square", {x}, wrong, GradCheckOptions{});
    CHECK_FALSE(r.passed());
    CHECK(r.worst_grad == doctest::Approx(2.0 * r.worst_fd).epsilon(1e-6));
}

TEST_CASE("Adam matches a scalar textbook implementation") {
    AdamConfig cfg;
    cfg.lr = 0.01;
    auto p = normal_parameter<double>("w", {1, 1, 1, 3}, 1.0, 5);
    const auto start = p.tensor->value;
    p.tensor->requires_grad = true;
    p.tensor->zero_grad();
    Adam<double> opt({&p}, cfg);
    std::vector<double> w = start, m(3, 0.0), v(3, 0.0);
    for (int t = 1; t <= 20; ++t) {
        for (std::size_t i = 0; i < 3; ++i) p.tensor->grad[i] = std::sin(t + 3.0 * i) + 0.1 * p.tensor->value[i];
        const auto g = p.tensor->grad;
        REQUIRE(opt.step());
        for (std::size_t i = 0; i < 3; ++i) {
            m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g[i] * g[i];
            const double mh = m[i] / (1 - std::pow(cfg.beta1, t)), vh = v[i] / (1 - std::pow(cfg.beta2, t));
            w[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
        }
        CHECK(max_abs_diff(w, p.tensor->value) < 1e-12);
    }
    CHECK(opt.state().t == 20);
}

TEST_CASE("Adam limits: first step has size lr, non-finite gradients skip") {
    AdamConfig cfg;
    auto p = constant_parameter<float>("w", {1, 1, 1, 4}, 1.0);
    p.tensor->requires_grad = true;
    p.tensor->zero_grad();
    p.tensor->grad = {3.0f, -0.5f, 1e-3f, 200.0f};
    Adam<float> opt({&p}, cfg);
    REQUIRE(opt.step());
    CHECK(p.tensor->value[0] == doctest::Approx(1.0 - 2e-4).epsilon(1e-6));
    CHECK(p.tensor->value[1] == doctest::Approx(1.0 + 2e-4).epsilon(1e-6));
    CHECK(p.tensor->value[3] == doctest::Approx(1.0 - 2e-4).epsilon(1e-6));
    const auto before = p.tensor->value;
    p.tensor->grad[2] = std::numeric_limits<float>::quiet_NaN();
    CHECK_FALSE(opt.step());
    CHECK(opt.skipped() == 1);
    CHECK(p.tensor->value == before);
    CHECK(opt.state().t == 1);
    opt.zero_grad();
    CHECK(p.tensor->grad[2] == 0.0f);
    AdamConfig bad;
    bad.beta1 = 1.0;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("checkpoint round trip is exact and byte-stable") {
    test::TempDir dir;
    ParameterFactory<float> f(3, 0.5);
    auto conv = f.conv("c", 2, 3, 3, 1, 1);
    auto norm = f.norm("n", 3);
    std::vector<Parameter<float>*> params;
    collect(params, conv);
    collect(params, norm);
    for (auto* p : params) {
        p->tensor->requires_grad = true;
        p->tensor->zero_grad();
        for (auto& g : p->tensor->grad) g = 0.25f;
    }
    Adam<float> opt(params, AdamConfig{});
    opt.step();
    Checkpoint ck;
    export_parameters(params, ck);
    export_optimizer(opt, "opt/", ck);
    ck.meta["note"] = "x=1\nsecond line";
    ck.save(dir / "a.oxck");
    ck.save(dir / "b.oxck");
    std::ifstream a(dir / "a.oxck", std::ios::binary), b(dir / "b.oxck", std::ios::binary);
    CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));

    const Checkpoint back = Checkpoint::load(dir / "a.oxck");
    CHECK(back.meta.at("note") == "x=1\nsecond line");
    ParameterFactory<float> g(99, 0.5);
    auto conv2 = g.conv("c", 2, 3, 3, 1, 1);
    auto norm2 = g.norm("n", 3);
    std::vector<Parameter<float>*> params2;
    collect(params2, conv2);
    collect(params2, norm2);
    CHECK_FALSE(conv2.weight.tensor->value == conv.weight.tensor->value);
    import_parameters(back, params2);
    for (std::size_t i = 0; i < params.size(); ++i) CHECK(params2[i]->tensor->value == params[i]->tensor->value);
    Adam<float> opt2(params2, AdamConfig{});
    import_optimizer(back, "opt/", opt2);
    CHECK(opt2.state().t == 1);
    CHECK(opt2.state().m == opt.state().m);
    CHECK(opt2.state().v == opt.state().v);

    auto wrong = g.conv("c", 2, 4, 3, 1, 1);
    std::vector<Parameter<float>*> wp;
    collect(wp, wrong);
    CHECK_THROWS(import_parameters(back, wp));
    CHECK_THROWS(back.parameter("missing"));
    std::ofstream(dir / "junk.oxck") << "nope";
    CHECK_THROWS(Checkpoint::load(dir / "junk.oxck"));
}

TEST_CASE("factory: names, seeds and bias-free layers") {
    ParameterFactory<double> f(7, 0.02);
    auto c = f.conv("x", 3, 8, 3, 1, 1);
    auto nb = f.conv("y", 3, 8, 3, 1, 1, false);
    CHECK(c.weight.name == "x.weight");
    CHECK(c.bias.name == "x.bias");
    CHECK(nb.bias.tensor == nullptr);
    std::vector<Parameter<double>*> ps;
    collect(ps, nb);
    CHECK(ps.size() == 1);
    auto r = f.residual("r", 8);
    ps.clear();
    collect(ps, r);
    CHECK(ps.size() == 6);  // two bias-free convs and two norms
    double m = 0, v = 0;
    for (double x : c.weight.tensor->value) m += x;
    m /= c.weight.tensor->value.size();
    for (double x : c.weight.tensor->value) v += (x - m) * (x - m);
    CHECK(std::sqrt(v / c.weight.tensor->value.size()) == doctest::Approx(0.02).epsilon(0.2));
    ParameterFactory<double> f2(7, 0.02);
    CHECK(f2.conv("x", 3, 8, 3, 1, 1).weight.tensor->value == c.weight.tensor->value);
    Tape<double> off(false);
    CHECK_THROWS(r(off, make_var<double>({1, 4, 5, 5})));
}
