#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "oxy/nn/kernels.hpp"

namespace oxy::nn::kernels::parallel {

namespace {

void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

// im2col buffers are capped at this many elements; larger outputs are tiled
// over output rows.
constexpr std::size_t kColBudget = std::size_t{1} << 22;

bool is_pointwise(const ConvGeometry& g) { return g.k == 1 && g.stride == 1 && g.pad == 0; }

int rows_per_tile(const ConvGeometry& g) {
    const std::size_t per_row = static_cast<std::size_t>(g.c_in) * g.k * g.k * g.out_w();
    return static_cast<int>(std::clamp<std::size_t>(kColBudget / std::max<std::size_t>(per_row, 1), 1, g.out_h()));
}

// col[(ci * k + ky) * k + kx][(oy - r0) * ow + ox] for output rows [r0, r1)
template <class T>
void im2col(const ConvGeometry& g, const T* x, int r0, int r1, T* col) {
    const int ow = g.out_w();
    const int cols = (r1 - r0) * ow;
    const int rows = g.c_in * g.k * g.k;
#pragma omp parallel for schedule(static)
    for (int row = 0; row < rows; ++row) {
        const int kx = row % g.k;
        const int ky = (row / g.k) % g.k;
        const int ci = row / (g.k * g.k);
        const T* plane = x + static_cast<std::size_t>(ci) * g.h * g.w;
        T* dst = col + static_cast<std::size_t>(row) * cols;
        for (int oy = r0; oy < r1; ++oy) {
            const int iy = oy * g.stride - g.pad + ky;
            T* out = dst + static_cast<std::size_t>(oy - r0) * ow;
            if (iy < 0 || iy >= g.h) {
                std::fill(out, out + ow, T(0));
                continue;
            }
            const T* src = plane + static_cast<std::size_t>(iy) * g.w;
            for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * g.stride - g.pad + kx;
                out[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
            }
        }
    }
}

template <class T>
void col2im_add(const ConvGeometry& g, const T* col, int r0, int r1, T* dx) {
    const int ow = g.out_w();
    const int cols = (r1 - r0) * ow;
    // one thread per input channel, so accumulation targets never collide
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < g.c_in; ++ci) {
        T* plane = dx + static_cast<std::size_t>(ci) * g.h * g.w;
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
                const T* src = col + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) * cols;
                for (int oy = r0; oy < r1; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= g.h) continue;
                    T* dst = plane + static_cast<std::size_t>(iy) * g.w;
                    const T* s = src + static_cast<std::size_t>(oy - r0) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx;
                        if (ix >= 0 && ix < g.w) dst[ix] += s[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

template <class T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* weight, const T* bias, T* y) {
    g.validate();
    const int oh = g.out_h(), ow = g.out_w();
    const int ohw = oh * ow;
    const int ckk = g.c_in * g.k * g.k;
    const int tile = rows_per_tile(g);
    std::vector<T> col(is_pointwise(g) ? 0 : static_cast<std::size_t>(ckk) * tile * ow);

    for (int n = 0; n < g.n; ++n) {
        const T* xn = x + static_cast<std::size_t>(n) * g.c_in * g.h * g.w;
        T* yn = y + static_cast<std::size_t>(n) * g.c_out * ohw;
        if (is_pointwise(g)) {
            gemm(CblasNoTrans, CblasNoTrans, g.c_out, ohw, ckk, T(1), weight, ckk, xn, ohw, T(0), yn, ohw);
        } else {
            for (int r0 = 0; r0 < oh; r0 += tile) {
                const int r1 = std::min(oh, r0 + tile);
                im2col(g, xn, r0, r1, col.data());
                gemm(CblasNoTrans, CblasNoTrans, g.c_out, (r1 - r0) * ow, ckk, T(1), weight, ckk, col.data(), (r1 - r0) * ow,
                     T(0), yn + static_cast<std::size_t>(r0) * ow, ohw);
            }
        }
        if (bias) {
#pragma omp parallel for schedule(static)
            for (int co = 0; co < g.c_out; ++co) {
                T* plane = yn + static_cast<std::size_t>(co) * ohw;
                for (int i = 0; i < ohw; ++i) plane[i] += bias[co];
            }
        }
    }
}

template <class T>
void conv2d_backward_input(const ConvGeometry& g, const T* weight, const T* dy, T* dx) {
    g.validate();
    const int oh = g.out_h(), ow = g.out_w();
    const int ohw = oh * ow;
    const int ckk = g.c_in * g.k * g.k;
    const int tile = rows_per_tile(g);
    std::vector<T> col(is_pointwise(g) ? 0 : static_cast<std::size_t>(ckk) * tile * ow);

    for (int n = 0; n < g.n; ++n) {
        const T* dyn = dy + static_cast<std::size_t>(n) * g.c_out * ohw;
        T* dxn = dx + static_cast<std::size_t>(n) * g.c_in * g.h * g.w;
        if (is_pointwise(g)) {
            gemm(CblasTrans, CblasNoTrans, ckk, ohw, g.c_out, T(1), weight, ckk, dyn, ohw, T(1), dxn, ohw);
            continue;
        }
        for (int r0 = 0; r0 < oh; r0 += tile) {
            const int r1 = std::min(oh, r0 + tile);
            const int cols = (r1 - r0) * ow;
            gemm(CblasTrans, CblasNoTrans, ckk, cols, g.c_out, T(1), weight, ckk, dyn + static_cast<std::size_t>(r0) * ow, ohw,
                 T(0), col.data(), cols);
            col2im_add(g, col.data(), r0, r1, dxn);
        }
    }
}

template <class T>
void conv2d_backward_weight(const ConvGeometry& g, const T* x, const T* dy, T* dweight, T* dbias) {
    g.validate();
    const int oh = g.out_h(), ow = g.out_w();
    const int ohw = oh * ow;
    const int ckk = g.c_in * g.k * g.k;
    const int tile = rows_per_tile(g);
    std::vector<T> col(is_pointwise(g) ? 0 : static_cast<std::size_t>(ckk) * tile * ow);

    for (int n = 0; n < g.n; ++n) {
        const T* xn = x + static_cast<std::size_t>(n) * g.c_in * g.h * g.w;
        const T* dyn = dy + static_cast<std::size_t>(n) * g.c_out * ohw;
        if (is_pointwise(g)) {
            gemm(CblasNoTrans, CblasTrans, g.c_out, ckk, ohw, T(1), dyn, ohw, xn, ohw, T(1), dweight, ckk);
        } else {
            for (int r0 = 0; r0 < oh; r0 += tile) {
                const int r1 = std::min(oh, r0 + tile);
                const int cols = (r1 - r0) * ow;
                im2col(g, xn, r0, r1, col.data());
                gemm(CblasNoTrans, CblasTrans, g.c_out, ckk, cols, T(1), dyn + static_cast<std::size_t>(r0) * ow, ohw,
                     col.data(), cols, T(1), dweight, ckk);
            }
        }
        if (dbias) {
#pragma omp parallel for schedule(static)
            for (int co = 0; co < g.c_out; ++co) {
                const T* plane = dyn + static_cast<std::size_t>(co) * ohw;
                T s = 0;
                for (int i = 0; i < ohw; ++i) s += plane[i];
                dbias[co] += s;
            }
        }
    }
}

template <class T>
void instance_norm_forward(const NormGeometry& g, const T* x, const T* scale, const T* shift, T eps, T* y, T* xhat,
                           T* inv_std) {
    const std::size_t m = static_cast<std::size_t>(g.plane);
    const int slices = g.n * g.c;
#pragma omp parallel for schedule(static)
    for (int s = 0; s < slices; ++s) {
        const int c = s % g.c;
        const T* xs = x + s * m;
        T mean = 0;
        for (std::size_t i = 0; i < m; ++i) mean += xs[i];
        mean /= static_cast<T>(m);
        T var = 0;
        for (std::size_t i = 0; i < m; ++i) var += (xs[i] - mean) * (xs[i] - mean);
        var /= static_cast<T>(m);
        const T inv = T(1) / std::sqrt(var + eps);
        inv_std[s] = inv;
        T* xh = xhat + s * m;
        T* ys = y + s * m;
        for (std::size_t i = 0; i < m; ++i) {
            xh[i] = (xs[i] - mean) * inv;
            ys[i] = scale[c] * xh[i] + shift[c];
        }
    }
}

template <class T>
void instance_norm_backward(const NormGeometry& g, const T* xhat, const T* inv_std, const T* scale, const T* dy, T* dx,
                            T* dscale, T* dshift) {
    const std::size_t m = static_cast<std::size_t>(g.plane);
    // per channel, samples in fixed order, so parameter gradients are deterministic
#pragma omp parallel for schedule(static)
    for (int c = 0; c < g.c; ++c) {
        for (int n = 0; n < g.n; ++n) {
            const std::size_t s = static_cast<std::size_t>(n) * g.c + c;
            const T* xh = xhat + s * m;
            const T* d = dy + s * m;
            T sum_d = 0, sum_dx = 0;
            for (std::size_t i = 0; i < m; ++i) {
                sum_d += d[i];
                sum_dx += d[i] * xh[i];
            }
            if (dscale) dscale[c] += sum_dx;
            if (dshift) dshift[c] += sum_d;
            if (!dx) continue;
            const T sum_dxhat = sum_d * scale[c];
            const T sum_dxhat_xhat = sum_dx * scale[c];
            const T k = inv_std[s] / static_cast<T>(m);
            T* out = dx + s * m;
            for (std::size_t i = 0; i < m; ++i) {
                out[i] += k * (static_cast<T>(m) * d[i] * scale[c] - sum_dxhat - xh[i] * sum_dxhat_xhat);
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

}  // namespace oxy::nn::kernels::parallel
