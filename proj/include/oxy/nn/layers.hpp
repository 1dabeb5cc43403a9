#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oxy/nn/ops.hpp"

namespace oxy::nn {

/// Convolution (or transposed convolution) with its parameters.
template <class T>
struct Conv {
    Parameter<T> weight;
    Parameter<T> bias;  // null tensor when the layer has no bias
    int stride = 1;
    int pad = 0;
    bool transposed = false;

    Var<T> operator()(Tape<T>& tape, const Var<T>& x) const {
        return transposed ? conv_transpose2d(tape, x, weight.tensor, bias.tensor, stride, pad)
                          : conv2d(tape, x, weight.tensor, bias.tensor, stride, pad);
    }
    int out_channels() const { return transposed ? weight.tensor->shape.c : weight.tensor->shape.n; }
};

template <class T>
struct InstanceNorm {
    Parameter<T> scale;
    Parameter<T> shift;
    T eps = T(1e-5);

    Var<T> operator()(Tape<T>& tape, const Var<T>& x) const {
        return instance_norm(tape, x, scale.tensor, shift.tensor, eps);
    }
};

/// x + F(x), F = conv -> norm -> relu -> conv -> norm, all 3x3 same-size and bias-free.
template <class T>
struct ResidualBlock {
    Conv<T> conv1;
    InstanceNorm<T> norm1;
    Conv<T> conv2;
    InstanceNorm<T> norm2;

    Var<T> operator()(Tape<T>& tape, const Var<T>& x) const;
};

/// Hands out parameters with consistent names and per-parameter seeds.
template <class T>
class ParameterFactory {
public:
    ParameterFactory(std::uint64_t seed, double init_std) : seed_(seed), init_std_(init_std) {}

    // A bias directly before instance norm is cancelled by the mean subtraction,
    // so layers feeding a norm are built with bias = false.
    Conv<T> conv(const std::string& name, int c_in, int c_out, int k, int stride, int pad, bool bias = true);
    Conv<T> conv_transpose(const std::string& name, int c_in, int c_out, int k, int stride, int pad, bool bias = true);
    InstanceNorm<T> norm(const std::string& name, int channels);
    ResidualBlock<T> residual(const std::string& name, int channels);

private:
    std::uint64_t next_seed() { return seed_ ^ (0x9e3779b97f4a7c15ULL * ++counter_); }

    std::uint64_t seed_;
    double init_std_;
    std::uint64_t counter_ = 0;
};

template <class T>
void collect(std::vector<Parameter<T>*>& out, Conv<T>& c) {
    out.push_back(&c.weight);
    if (c.bias.tensor) out.push_back(&c.bias);
}
template <class T>
void collect(std::vector<Parameter<T>*>& out, InstanceNorm<T>& n) {
    out.push_back(&n.scale);
    out.push_back(&n.shift);
}
template <class T>
void collect(std::vector<Parameter<T>*>& out, ResidualBlock<T>& b) {
    collect(out, b.conv1);
    collect(out, b.norm1);
    collect(out, b.conv2);
    collect(out, b.norm2);
}

template <class T>
void zero_grads(const std::vector<Parameter<T>*>& params) {
    for (auto* p : params) p->tensor->zero_grad();
}

std::size_t parameter_count(const std::vector<Parameter<float>*>& params);

}  // namespace oxy::nn
