#pragma once

#include <stdexcept>
#include <string>

namespace oxy::nn {

/// Cross-correlation geometry. Weights are laid out [c_out][c_in][k][k].
struct ConvGeometry {
    int n = 1;
    int c_in = 0;
    int h = 0;
    int w = 0;
    int c_out = 0;
    int k = 1;
    int stride = 1;
    int pad = 0;

    int out_h() const { return (h + 2 * pad - k) / stride + 1; }
    int out_w() const { return (w + 2 * pad - k) / stride + 1; }
    std::size_t in_size() const { return static_cast<std::size_t>(n) * c_in * h * w; }
    std::size_t out_size() const { return static_cast<std::size_t>(n) * c_out * out_h() * out_w(); }
    std::size_t weight_size() const { return static_cast<std::size_t>(c_out) * c_in * k * k; }
    void validate() const {
        if (n < 1 || c_in < 1 || c_out < 1 || k < 1 || stride < 1 || pad < 0 || h + 2 * pad < k || w + 2 * pad < k) {
            throw std::invalid_argument("invalid convolution geometry");
        }
    }
};

struct NormGeometry {
    int n = 1;
    int c = 0;
    int plane = 0;  // H * W
};

// Two implementations of each kernel: `parallel` (im2col + BLAS GEMM, with
// OpenMP over channels and slices) runs the network; `reference` is a direct
// serial loop nest kept as the oracle for tests and benchmarks.
// Backward kernels accumulate (+=) into their outputs. Instance norm works per
// (n, c) slice: xhat = (x - mean) / sqrt(var + eps), y = scale * xhat + shift.

namespace kernels::parallel {
template <class T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* weight, const T* bias, T* y);
template <class T>
void conv2d_backward_input(const ConvGeometry& g, const T* weight, const T* dy, T* dx);
template <class T>
void conv2d_backward_weight(const ConvGeometry& g, const T* x, const T* dy, T* dweight, T* dbias);
template <class T>
void instance_norm_forward(const NormGeometry& g, const T* x, const T* scale, const T* shift, T eps, T* y, T* xhat,
                           T* inv_std);
template <class T>
void instance_norm_backward(const NormGeometry& g, const T* xhat, const T* inv_std, const T* scale, const T* dy, T* dx,
                            T* dscale, T* dshift);
}  // namespace kernels::parallel

namespace kernels::reference {
template <class T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* weight, const T* bias, T* y);
template <class T>
void conv2d_backward_input(const ConvGeometry& g, const T* weight, const T* dy, T* dx);
template <class T>
void conv2d_backward_weight(const ConvGeometry& g, const T* x, const T* dy, T* dweight, T* dbias);
template <class T>
void instance_norm_forward(const NormGeometry& g, const T* x, const T* scale, const T* shift, T eps, T* y, T* xhat,
                           T* inv_std);
template <class T>
void instance_norm_backward(const NormGeometry& g, const T* xhat, const T* inv_std, const T* scale, const T* dy, T* dx,
                            T* dscale, T* dshift);
}  // namespace kernels::reference

}  // namespace oxy::nn
