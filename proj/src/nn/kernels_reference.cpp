#include <cmath>

#include "oxy/nn/kernels.hpp"

namespace oxy::nn::kernels::reference {

template <class T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* weight, const T* bias, T* y) {
    g.validate();
    const int oh = g.out_h(), ow = g.out_w();
    for (int n = 0; n < g.n; ++n) {
        for (int co = 0; co < g.c_out; ++co) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    T acc = bias ? bias[co] : T(0);
                    for (int ci = 0; ci < g.c_in; ++ci) {
                        for (int ky = 0; ky < g.k; ++ky) {
                            const int iy = oy * g.stride - g.pad + ky;
                            if (iy < 0 || iy >= g.h) continue;
                            for (int kx = 0; kx < g.k; ++kx) {
                                const int ix = ox * g.stride - g.pad + kx;
                                if (ix < 0 || ix >= g.w) continue;
                                acc += weight[((co * g.c_in + ci) * g.k + ky) * g.k + kx] *
                                       x[((static_cast<std::size_t>(n) * g.c_in + ci) * g.h + iy) * g.w + ix];
                            }
                        }
                    }
                    y[((static_cast<std::size_t>(n) * g.c_out + co) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
}

template <class T>
void conv2d_backward_input(const ConvGeometry& g, const T* weight, const T* dy, T* dx) {
    g.validate();
    const int oh = g.out_h(), ow = g.out_w();
    for (int n = 0; n < g.n; ++n) {
        for (int co = 0; co < g.c_out; ++co) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const T grad = dy[((static_cast<std::size_t>(n) * g.c_out + co) * oh + oy) * ow + ox];
                    for (int ci = 0; ci < g.c_in; ++ci) {
                        for (int ky = 0; ky < g.k; ++ky) {
                            const int iy = oy * g.stride - g.pad + ky;
                            if (iy < 0 || iy >= g.h) continue;
                            for (int kx = 0; kx < g.k; ++kx) {
                                const int ix = ox * g.stride - g.pad + kx;
                                if (ix < 0 || ix >= g.w) continue;
                                dx[((static_cast<std::size_t>(n) * g.c_in + ci) * g.h + iy) * g.w + ix] +=
                                    weight[((co * g.c_in + ci) * g.k + ky) * g.k + kx] * grad;
                            }
                        }
                    }
                }
            }
        }
    }
}

template <class T>
void conv2d_backward_weight(const ConvGeometry& g, const T* x, const T* dy, T* dweight, T* dbias) {
    g.validate();
    const int oh = g.out_h(), ow = g.out_w();
    for (int n = 0; n < g.n; ++n) {
        for (int co = 0; co < g.c_out; ++co) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const T grad = dy[((static_cast<std::size_t>(n) * g.c_out + co) * oh + oy) * ow + ox];
                    if (dbias) dbias[co] += grad;
                    for (int ci = 0; ci < g.c_in; ++ci) {
                        for (int ky = 0; ky < g.k; ++ky) {
                            const int iy = oy * g.stride - g.pad + ky;
                            if (iy < 0 || iy >= g.h) continue;
                            for (int kx = 0; kx < g.k; ++kx) {
                                const int ix = ox * g.stride - g.pad + kx;
                                if (ix < 0 || ix >= g.w) continue;
                                dweight[((co * g.c_in + ci) * g.k + ky) * g.k + kx] +=
                                    x[((static_cast<std::size_t>(n) * g.c_in + ci) * g.h + iy) * g.w + ix] * grad;
                            }
                        }
                    }
                }
            }
        }
    }
}

template <class T>
void instance_norm_forward(const NormGeometry& g, const T* x, const T* scale, const T* shift, T eps, T* y, T* xhat,
                           T* inv_std) {
    const std::size_t m = static_cast<std::size_t>(g.plane);
    for (int n = 0; n < g.n; ++n) {
        for (int c = 0; c < g.c; ++c) {
            const std::size_t s = static_cast<std::size_t>(n) * g.c + c;
            const T* xs = x + s * m;
            T mean = 0;
            for (std::size_t i = 0; i < m; ++i) mean += xs[i];
            mean /= static_cast<T>(m);
            T var = 0;
            for (std::size_t i = 0; i < m; ++i) var += (xs[i] - mean) * (xs[i] - mean);
            var /= static_cast<T>(m);
            const T inv = T(1) / std::sqrt(var + eps);
            inv_std[s] = inv;
            for (std::size_t i = 0; i < m; ++i) {
                xhat[s * m + i] = (xs[i] - mean) * inv;
                y[s * m + i] = scale[c] * xhat[s * m + i] + shift[c];
            }
        }
    }
}

template <class T>
void instance_norm_backward(const NormGeometry& g, const T* xhat, const T* inv_std, const T* scale, const T* dy, T* dx,
                            T* dscale, T* dshift) {
    const std::size_t m = static_cast<std::size_t>(g.plane);
    for (int n = 0; n < g.n; ++n) {
        for (int c = 0; c < g.c; ++c) {
            const std::size_t s = static_cast<std::size_t>(n) * g.c + c;
            T sum_dxhat = 0, sum_dxhat_xhat = 0;
            for (std::size_t i = 0; i < m; ++i) {
                const T d = dy[s * m + i] * scale[c];
                sum_dxhat += d;
                sum_dxhat_xhat += d * xhat[s * m + i];
                if (dscale) dscale[c] += dy[s * m + i] * xhat[s * m + i];
                if (dshift) dshift[c] += dy[s * m + i];
            }
            if (!dx) continue;
            const T k = inv_std[s] / static_cast<T>(m);
            for (std::size_t i = 0; i < m; ++i) {
                const T d = dy[s * m + i] * scale[c];
                dx[s * m + i] += k * (static_cast<T>(m) * d - sum_dxhat - xhat[s * m + i] * sum_dxhat_xhat);
            }
        }
    }
}

#define OXY_INSTANTIATE(T)                                                                                       \
    template void conv2d_forward<T>(const ConvGeometry&, const T*, const T*, const T*, T*);                      \
    template void conv2d_backward_input<T>(const ConvGeometry&, const T*, const T*, T*);                         \
    template void conv2d_backward_weight<T>(const ConvGeometry&, const T*, const T*, T*, T*);                    \
    template void instance_norm_forward<T>(const NormGeometry&, const T*, const T*, const T*, T, T*, T*, T*);    \
    template void instance_norm_backward<T>(const NormGeometry&, const T*, const T*, const T*, const T*, T*, T*, \
                                            T*);
OXY_INSTANTIATE(float)
OXY_INSTANTIATE(double)
#undef OXY_INSTANTIATE

}  // namespace oxy::nn::kernels::reference
