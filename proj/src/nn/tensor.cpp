#include "oxy/nn/tensor.hpp"

#include <stdexcept>

#include "oxy/random.hpp"

namespace oxy::nn {

std::string Shape::str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
}

template <class T>
void Tape<T>::backward(const Var<T>& loss) {
    if (loss->value.size() != 1) throw std::invalid_argument("backward needs a scalar loss, got " + loss->shape.str());
    if (!loss->requires_grad) throw std::invalid_argument("loss does not depend on any trainable tensor");
    loss->grad.assign(1, T(1));
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

template <class T>
Parameter<T> normal_parameter(std::string name, Shape s, double stddev, std::uint64_t seed) {
    Parameter<T> p{std::move(name), make_var<T>(s, true), {"normal", stddev, seed}};
    Rng rng(seed);
    for (T& v : p.tensor->value) v = static_cast<T>(stddev * rng.normal());
    return p;
}

template <class T>
Parameter<T> constant_parameter(std::string name, Shape s, double value) {
    return {std::move(name), make_var<T>(s, true, static_cast<T>(value)), {"constant", value, 0}};
}

template class Tape<float>;
template class Tape<double>;
template Parameter<float> normal_parameter<float>(std::string, Shape, double, std::uint64_t);
template Parameter<double> normal_parameter<double>(std::string, Shape, double, std::uint64_t);
template Parameter<float> constant_parameter<float>(std::string, Shape, double);
template Parameter<double> constant_parameter<double>(std::string, Shape, double);

}  // namespace oxy::nn
