#include "oxy/nn/layers.hpp"

#include <stdexcept>

#include "oxy/random.hpp"

namespace oxy::nn {

template <class T>
Var<T> ResidualBlock<T>::operator()(Tape<T>& tape, const Var<T>& x) const {
    if (conv1.weight.tensor->shape.c != x->shape.c || conv2.out_channels() != x->shape.c) {
        throw std::invalid_argument("residual block expects " + std::to_string(conv1.weight.tensor->shape.c) +
                                    " channels, got " + std::to_string(x->shape.c));
    }
    auto h = relu(tape, norm1(tape, conv1(tape, x)));
    return add(tape, x, norm2(tape, conv2(tape, h)));
}

template <class T>
Conv<T> ParameterFactory<T>::conv(const std::string& name, int c_in, int c_out, int k, int stride, int pad, bool bias) {
    return {normal_parameter<T>(name + ".weight", {c_out, c_in, k, k}, init_std_, mix_seed(seed_, next_seed())),
            bias ? constant_parameter<T>(name + ".bias", {c_out, 1, 1, 1}, 0.0) : Parameter<T>{}, stride, pad, false};
}

template <class T>
Conv<T> ParameterFactory<T>::conv_transpose(const std::string& name, int c_in, int c_out, int k, int stride, int pad,
                                            bool bias) {
    return {normal_parameter<T>(name + ".weight", {c_in, c_out, k, k}, init_std_, mix_seed(seed_, next_seed())),
            bias ? constant_parameter<T>(name + ".bias", {c_out, 1, 1, 1}, 0.0) : Parameter<T>{}, stride, pad, true};
}

template <class T>
InstanceNorm<T> ParameterFactory<T>::norm(const std::string& name, int channels) {
    return {constant_parameter<T>(name + ".scale", {channels, 1, 1, 1}, 1.0),
            constant_parameter<T>(name + ".shift", {channels, 1, 1, 1}, 0.0), T(1e-5)};
}

template <class T>
ResidualBlock<T> ParameterFactory<T>::residual(const std::string& name, int channels) {
    return {conv(name + ".conv1", channels, channels, 3, 1, 1, false), norm(name + ".norm1", channels),
            conv(name + ".conv2", channels, channels, 3, 1, 1, false), norm(name + ".norm2", channels)};
}

std::size_t parameter_count(const std::vector<Parameter<float>*>& params) {
    std::size_t n = 0;
    for (const auto* p : params) n += p->tensor->value.size();
    return n;
}

template struct ResidualBlock<float>;
template struct ResidualBlock<double>;
template class ParameterFactory<float>;
template class ParameterFactory<double>;

}  // namespace oxy::nn
