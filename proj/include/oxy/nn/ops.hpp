#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oxy/nn/kernels.hpp"
#include "oxy/nn/tensor.hpp"

namespace oxy::nn {

// Differentiable operations. Each records its backward closure on the tape
// when the tape is enabled and some input requires a gradient.

/// Output H' = floor((H + 2p - k) / s) + 1. weight: c_out x c_in x k x k; bias may be null.
template <class T>
Var<T> conv2d(Tape<T>& tape, const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad);

/// Adjoint of conv2d's input map. weight: c_in x c_out x k x k; H' = (H - 1) s - 2p + k.
template <class T>
Var<T> conv_transpose2d(Tape<T>& tape, const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad);

/// Per (sample, channel) spatial standardisation followed by a per-channel affine map.
template <class T>
Var<T> instance_norm(Tape<T>& tape, const Var<T>& x, const Var<T>& scale, const Var<T>& shift, T eps = T(1e-5));

template <class T>
Var<T> relu(Tape<T>& tape, const Var<T>& x);
template <class T>
Var<T> leaky_relu(Tape<T>& tape, const Var<T>& x, T slope);
template <class T>
Var<T> tanh(Tape<T>& tape, const Var<T>& x);
template <class T>
Var<T> sigmoid(Tape<T>& tape, const Var<T>& x);

template <class T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> scale(Tape<T>& tape, const Var<T>& x, T factor);

/// Channel concatenation; N, H, W must agree.
template <class T>
Var<T> concat_channels(Tape<T>& tape, const Var<T>& a, const Var<T>& b);

/// Sum over all elements of x * weights (weights fixed); a scalar.
template <class T>
Var<T> weighted_sum(Tape<T>& tape, const Var<T>& x, std::span<const T> weights);

/// Mean of |a - b| over pixels whose weight is 1; b and the weights are constants.
/// Excluded pixels contribute neither loss nor gradient.
template <class T>
Var<T> masked_mean_abs(Tape<T>& tape, const Var<T>& prediction, const Var<T>& target, std::span<const std::uint8_t> include);

/// x where include is set, 0 elsewhere (no gradient through excluded elements).
template <class T>
Var<T> keep_where(Tape<T>& tape, const Var<T>& x, std::span<const std::uint8_t> include);

/// Mean binary cross-entropy of probabilities against a constant label,
/// with probabilities clamped to [clamp, 1 - clamp].
template <class T>
Var<T> bce_mean(Tape<T>& tape, const Var<T>& probabilities, T label, T clamp = T(1e-7));

/// Which kernel family the conv and norm ops dispatch to.
enum class KernelPath { parallel, reference };
void set_kernel_path(KernelPath path);
KernelPath kernel_path();

}  // namespace oxy::nn
