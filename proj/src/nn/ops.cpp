#include "oxy/nn/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <initializer_list>
#include <stdexcept>

namespace oxy::nn {

namespace {

std::atomic<KernelPath> g_kernel_path{KernelPath::parallel};

template <class T>
bool tracks(const Tape<T>& tape, std::initializer_list<bool> needs) {
    return tape.enabled() && std::any_of(needs.begin(), needs.end(), [](bool b) { return b; });
}

template <class T>
bool needs_grad(const Var<T>& v) {
    return v && v->requires_grad;
}

template <class T>
void conv_fwd(const ConvGeometry& g, const T* x, const T* w, const T* b, T* y) {
    if (kernel_path() == KernelPath::parallel) {
        kernels::parallel::conv2d_forward(g, x, w, b, y);
    } else {
        kernels::reference::conv2d_forward(g, x, w, b, y);
    }
}

template <class T>
void conv_bwd_input(const ConvGeometry& g, const T* w, const T* dy, T* dx) {
    if (kernel_path() == KernelPath::parallel) {
        kernels::parallel::conv2d_backward_input(g, w, dy, dx);
    } else {
        kernels::reference::conv2d_backward_input(g, w, dy, dx);
    }
}

template <class T>
void conv_bwd_weight(const ConvGeometry& g, const T* x, const T* dy, T* dw, T* db) {
    if (kernel_path() == KernelPath::parallel) {
        kernels::parallel::conv2d_backward_weight(g, x, dy, dw, db);
    } else {
        kernels::reference::conv2d_backward_weight(g, x, dy, dw, db);
    }
}

template <class T, class F, class G>
Var<T> unary(Tape<T>& tape, const Var<T>& x, F forward, G derivative_from_output) {
    auto y = make_var<T>(x->shape, tracks(tape, {needs_grad(x)}));
    for (std::size_t i = 0; i < x->value.size(); ++i) y->value[i] = forward(x->value[i]);
    if (y->requires_grad) {
        tape.record([x, y, derivative_from_output] {
            for (std::size_t i = 0; i < y->grad.size(); ++i) {
                x->grad[i] += y->grad[i] * derivative_from_output(x->value[i], y->value[i]);
            }
        });
    }
    return y;
}

}  // namespace

void set_kernel_path(KernelPath path) { g_kernel_path = path; }
KernelPath kernel_path() { return g_kernel_path; }

template <class T>
Var<T> conv2d(Tape<T>& tape, const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad) {
    const Shape& xs = x->shape;
    const Shape& ws = weight->shape;
    if (ws.c != xs.c || ws.h != ws.w) {
        throw std::invalid_argument("conv2d: weight " + ws.str() + " does not fit input " + xs.str());
    }
    if (bias && bias->value.size() != static_cast<std::size_t>(ws.n)) throw std::invalid_argument("conv2d: bias size mismatch");
    const ConvGeometry g{xs.n, xs.c, xs.h, xs.w, ws.n, ws.h, stride, pad};
    g.validate();
    auto y = make_var<T>({xs.n, ws.n, g.out_h(), g.out_w()}, tracks(tape, {needs_grad(x), needs_grad(weight), needs_grad(bias)}));
    conv_fwd(g, x->value.data(), weight->value.data(), bias ? bias->value.data() : nullptr, y->value.data());
    if (y->requires_grad) {
        tape.record([x, weight, bias, y, g] {
            if (needs_grad(x)) conv_bwd_input(g, weight->value.data(), y->grad.data(), x->grad.data());
            if (needs_grad(weight) || needs_grad(bias)) {
                std::vector<T> scratch_w;
                T* dw = weight->requires_grad ? weight->grad.data() : (scratch_w.assign(g.weight_size(), T(0)), scratch_w.data());
                conv_bwd_weight(g, x->value.data(), y->grad.data(), dw, needs_grad(bias) ? bias->grad.data() : nullptr);
            }
        });
    }
    return y;
}

template <class T>
Var<T> conv_transpose2d(Tape<T>& tape, const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad) {
    const Shape& xs = x->shape;
    const Shape& ws = weight->shape;
    if (ws.n != xs.c || ws.h != ws.w) {
        throw std::invalid_argument("conv_transpose2d: weight " + ws.str() + " does not fit input " + xs.str());
    }
    const int c_out = ws.c, k = ws.h;
    const int oh = (xs.h - 1) * stride - 2 * pad + k;
    const int ow = (xs.w - 1) * stride - 2 * pad + k;
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv_transpose2d: empty output");
    if (bias && bias->value.size() != static_cast<std::size_t>(c_out)) throw std::invalid_argument("conv_transpose2d: bias size mismatch");
    // the equivalent forward convolution maps the output space back onto x
    const ConvGeometry g{xs.n, c_out, oh, ow, xs.c, k, stride, pad};
    g.validate();
    if (g.out_h() != xs.h || g.out_w() != xs.w) throw std::invalid_argument("conv_transpose2d: inconsistent geometry");

    auto y = make_var<T>({xs.n, c_out, oh, ow}, tracks(tape, {needs_grad(x), needs_grad(weight), needs_grad(bias)}));
    conv_bwd_input(g, weight->value.data(), x->value.data(), y->value.data());
    if (bias) {
        const std::size_t plane = y->shape.plane();
        for (int n = 0; n < xs.n; ++n) {
            for (int c = 0; c < c_out; ++c) {
                T* p = y->value.data() + (static_cast<std::size_t>(n) * c_out + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) p[i] += bias->value[c];
            }
        }
    }
    if (y->requires_grad) {
        tape.record([x, weight, bias, y, g] {
            if (needs_grad(x)) {
                std::vector<T> dx(x->value.size());
                conv_fwd(g, y->grad.data(), weight->value.data(), static_cast<const T*>(nullptr), dx.data());
                for (std::size_t i = 0; i < dx.size(); ++i) x->grad[i] += dx[i];
            }
            if (needs_grad(weight)) conv_bwd_weight(g, y->grad.data(), x->value.data(), weight->grad.data(), static_cast<T*>(nullptr));
            if (needs_grad(bias)) {
                const std::size_t plane = y->shape.plane();
                for (int n = 0; n < y->shape.n; ++n) {
                    for (int c = 0; c < y->shape.c; ++c) {
                        const T* p = y->grad.data() + (static_cast<std::size_t>(n) * y->shape.c + c) * plane;
                        T s = 0;
                        for (std::size_t i = 0; i < plane; ++i) s += p[i];
                        bias->grad[c] += s;
                    }
                }
            }
        });
    }
    return y;
}

template <class T>
Var<T> instance_norm(Tape<T>& tape, const Var<T>& x, const Var<T>& scale, const Var<T>& shift, T eps) {
    const Shape& s = x->shape;
    if (s.h * s.w < 2) throw std::invalid_argument("instance_norm needs at least two spatial positions, got " + s.str());
    if (scale->value.size() != static_cast<std::size_t>(s.c) || shift->value.size() != static_cast<std::size_t>(s.c)) {
        throw std::invalid_argument("instance_norm: affine parameters do not match channels");
    }
    const NormGeometry g{s.n, s.c, s.h * s.w};
    auto y = make_var<T>(s, tracks(tape, {needs_grad(x), needs_grad(scale), needs_grad(shift)}));
    auto xhat = std::make_shared<std::vector<T>>(x->value.size());
    auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(s.n) * s.c);
    if (kernel_path() == KernelPath::parallel) {
        kernels::parallel::instance_norm_forward(g, x->value.data(), scale->value.data(), shift->value.data(), eps,
                                                 y->value.data(), xhat->data(), inv_std->data());
    } else {
        kernels::reference::instance_norm_forward(g, x->value.data(), scale->value.data(), shift->value.data(), eps,
                                                  y->value.data(), xhat->data(), inv_std->data());
    }
    if (y->requires_grad) {
        tape.record([x, scale, shift, y, g, xhat, inv_std] {
            T* dx = needs_grad(x) ? x->grad.data() : nullptr;
            T* dscale = needs_grad(scale) ? scale->grad.data() : nullptr;
            T* dshift = needs_grad(shift) ? shift->grad.data() : nullptr;
            if (kernel_path() == KernelPath::parallel) {
                kernels::parallel::instance_norm_backward(g, xhat->data(), inv_std->data(), scale->value.data(), y->grad.data(),
                                                          dx, dscale, dshift);
            } else {
                kernels::reference::instance_norm_backward(g, xhat->data(), inv_std->data(), scale->value.data(),
                                                           y->grad.data(), dx, dscale, dshift);
            }
        });
    }
    return y;
}

template <class T>
Var<T> relu(Tape<T>& tape, const Var<T>& x) {
    return unary(tape, x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
Var<T> leaky_relu(Tape<T>& tape, const Var<T>& x, T slope) {
    return unary(
        tape, x, [slope](T v) { return v > T(0) ? v : slope * v; }, [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <class T>
Var<T> tanh(Tape<T>& tape, const Var<T>& x) {
    return unary(tape, x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Var<T> sigmoid(Tape<T>& tape, const Var<T>& x) {
    const auto f = [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
    };
    return unary(tape, x, f, [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
    if (!(a->shape == b->shape)) throw std::invalid_argument("add: shape mismatch " + a->shape.str() + " vs " + b->shape.str());
    auto y = make_var<T>(a->shape, tracks(tape, {needs_grad(a), needs_grad(b)}));
    for (std::size_t i = 0; i < y->value.size(); ++i) y->value[i] = a->value[i] + b->value[i];
    if (y->requires_grad) {
        tape.record([a, b, y] {
            for (const Var<T>* in : {&a, &b}) {
                if (!needs_grad(*in)) continue;
                for (std::size_t i = 0; i < y->grad.size(); ++i) (*in)->grad[i] += y->grad[i];
            }
        });
    }
    return y;
}

template <class T>
Var<T> scale(Tape<T>& tape, const Var<T>& x, T factor) {
    return unary(tape, x, [factor](T v) { return factor * v; }, [factor](T, T) { return factor; });
}

template <class T>
Var<T> concat_channels(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
    const Shape& sa = a->shape;
    const Shape& sb = b->shape;
    if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
        throw std::invalid_argument("concat_channels: " + sa.str() + " and " + sb.str() + " differ outside the channel axis");
    }
    const Shape so{sa.n, sa.c + sb.c, sa.h, sa.w};
    auto y = make_var<T>(so, tracks(tape, {needs_grad(a), needs_grad(b)}));
    const std::size_t plane = so.plane();
    const std::size_t na = sa.c * plane, nb = sb.c * plane;
    for (int n = 0; n < so.n; ++n) {
        std::copy_n(a->value.data() + n * na, na, y->value.data() + n * (na + nb));
        std::copy_n(b->value.data() + n * nb, nb, y->value.data() + n * (na + nb) + na);
    }
    if (y->requires_grad) {
        tape.record([a, b, y, na, nb] {
            for (int n = 0; n < y->shape.n; ++n) {
                const T* g = y->grad.data() + n * (na + nb);
                if (needs_grad(a)) {
                    for (std::size_t i = 0; i < na; ++i) a->grad[n * na + i] += g[i];
                }
                if (needs_grad(b)) {
                    for (std::size_t i = 0; i < nb; ++i) b->grad[n * nb + i] += g[na + i];
                }
            }
        });
    }
    return y;
}

template <class T>
Var<T> weighted_sum(Tape<T>& tape, const Var<T>& x, std::span<const T> weights) {
    if (weights.size() != x->value.size()) throw std::invalid_argument("weighted_sum: weight count mismatch");
    auto y = make_var<T>({1, 1, 1, 1}, tracks(tape, {needs_grad(x)}));
    T s = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) s += x->value[i] * weights[i];
    y->value[0] = s;
    if (y->requires_grad) {
        std::vector<T> w(weights.begin(), weights.end());
        tape.record([x, y, w = std::move(w)] {
            for (std::size_t i = 0; i < w.size(); ++i) x->grad[i] += y->grad[0] * w[i];
        });
    }
    return y;
}

template <class T>
Var<T> masked_mean_abs(Tape<T>& tape, const Var<T>& prediction, const Var<T>& target, std::span<const std::uint8_t> include) {
    if (!(prediction->shape == target->shape) || include.size() != prediction->value.size()) {
        throw std::invalid_argument("masked_mean_abs: shape mismatch");
    }
    std::size_t count = 0;
    for (auto m : include) count += m != 0;
    if (count == 0) throw std::invalid_argument("masked loss has no effective pixels");
    auto y = make_var<T>({1, 1, 1, 1}, tracks(tape, {needs_grad(prediction)}));
    T s = 0;
    for (std::size_t i = 0; i < include.size(); ++i) {
        if (include[i]) s += std::abs(prediction->value[i] - target->value[i]);
    }
    const T inv = T(1) / static_cast<T>(count);
    y->value[0] = s * inv;
    if (y->requires_grad) {
        std::vector<std::uint8_t> keep(include.begin(), include.end());
        tape.record([prediction, target, y, keep = std::move(keep), inv] {
            const T g = y->grad[0] * inv;
            for (std::size_t i = 0; i < keep.size(); ++i) {
                if (!keep[i]) continue;
                const T d = prediction->value[i] - target->value[i];
                prediction->grad[i] += d > T(0) ? g : (d < T(0) ? -g : T(0));
            }
        });
    }
    return y;
}

template <class T>
Var<T> keep_where(Tape<T>& tape, const Var<T>& x, std::span<const std::uint8_t> include) {
    if (include.size() != x->value.size()) throw std::invalid_argument("keep_where: mask size mismatch");
    auto y = make_var<T>(x->shape, tracks(tape, {needs_grad(x)}));
    for (std::size_t i = 0; i < include.size(); ++i) y->value[i] = include[i] ? x->value[i] : T(0);
    if (y->requires_grad) {
        std::vector<std::uint8_t> keep(include.begin(), include.end());
        tape.record([x, y, keep = std::move(keep)] {
            for (std::size_t i = 0; i < keep.size(); ++i) {
                if (keep[i]) x->grad[i] += y->grad[i];
            }
        });
    }
    return y;
}

template <class T>
Var<T> bce_mean(Tape<T>& tape, const Var<T>& probabilities, T label, T clamp) {
    auto y = make_var<T>({1, 1, 1, 1}, tracks(tape, {needs_grad(probabilities)}));
    const auto& p = probabilities->value;
    const T inv = T(1) / static_cast<T>(p.size());
    T s = 0;
    for (T v : p) {
        const T c = std::clamp(v, clamp, T(1) - clamp);
        s -= label * std::log(c) + (T(1) - label) * std::log(T(1) - c);
    }
    y->value[0] = s * inv;
    if (y->requires_grad) {
        tape.record([probabilities, y, label, clamp, inv] {
            const T g = y->grad[0] * inv;
            for (std::size_t i = 0; i < probabilities->value.size(); ++i) {
                const T v = probabilities->value[i];
                if (v < clamp || v > T(1) - clamp) continue;  // flat outside the clamp
                probabilities->grad[i] += g * (-label / v + (T(1) - label) / (T(1) - v));
            }
        });
    }
    return y;
}

#define OXY_INSTANTIATE(T)                                                                                    \
    template Var<T> conv2d<T>(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&, int, int);               \
    template Var<T> conv_transpose2d<T>(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&, int, int);     \
    template Var<T> instance_norm<T>(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&, T);               \
    template Var<T> relu<T>(Tape<T>&, const Var<T>&);                                                         \
    template Var<T> leaky_relu<T>(Tape<T>&, const Var<T>&, T);                                                \
    template Var<T> tanh<T>(Tape<T>&, const Var<T>&);                                                         \
    template Var<T> sigmoid<T>(Tape<T>&, const Var<T>&);                                                      \
    template Var<T> add<T>(Tape<T>&, const Var<T>&, const Var<T>&);                                           \
    template Var<T> scale<T>(Tape<T>&, const Var<T>&, T);                                                     \
    template Var<T> concat_channels<T>(Tape<T>&, const Var<T>&, const Var<T>&);                               \
    template Var<T> weighted_sum<T>(Tape<T>&, const Var<T>&, std::span<const T>);                             \
    template Var<T> masked_mean_abs<T>(Tape<T>&, const Var<T>&, const Var<T>&, std::span<const std::uint8_t>); \
    template Var<T> keep_where<T>(Tape<T>&, const Var<T>&, std::span<const std::uint8_t>);                    \
    template Var<T> bce_mean<T>(Tape<T>&, const Var<T>&, T, T);
OXY_INSTANTIATE(float)
OXY_INSTANTIATE(double)
#undef OXY_INSTANTIATE

}  // namespace oxy::nn
