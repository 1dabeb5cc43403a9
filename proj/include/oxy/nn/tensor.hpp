#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace oxy::nn {

struct Shape {
    int n = 0, c = 0, h = 0, w = 0;

    std::size_t size() const { return static_cast<std::size_t>(n) * c * h * w; }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::string str() const;
    bool operator==(const Shape&) const = default;
};

/// N x C x H x W array with an optional gradient accumulator.
template <class T>
struct Tensor {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // empty unless requires_grad
    bool requires_grad = false;

    Tensor() = default;
    Tensor(Shape s, bool needs_grad = false, T fill = T(0))
        : shape(s), value(s.size(), fill), requires_grad(needs_grad) {
        if (needs_grad) grad.assign(s.size(), T(0));
    }

    void zero_grad() {
        if (requires_grad) grad.assign(value.size(), T(0));
    }
    T item() const { return value.at(0); }
};

template <class T>
using Var = std::shared_ptr<Tensor<T>>;

template <class T>
Var<T> make_var(Shape s, bool requires_grad = false, T fill = T(0)) {
    return std::make_shared<Tensor<T>>(s, requires_grad, fill);
}

template <class T>
Var<T> make_var(Shape s, std::vector<T> values, bool requires_grad = false) {
    auto v = std::make_shared<Tensor<T>>(s, requires_grad);
    v->value = std::move(values);
    return v;
}

/// Copy of the value with no gradient history.
template <class T>
Var<T> detach(const Var<T>& x) {
    return make_var<T>(x->shape, x->value, false);
}

/// Records backward closures in execution order; backward replays them in
/// exact reverse. A disabled tape records nothing (inference mode).
template <class T>
class Tape {
public:
    explicit Tape(bool enabled = true) : enabled_(enabled) {}

    bool enabled() const { return enabled_; }
    std::size_t size() const { return ops_.size(); }
    void record(std::function<void()> backward) {
        if (enabled_) ops_.push_back(std::move(backward));
    }
    /// Seeds d loss / d loss = 1 and runs every recorded closure.
    void backward(const Var<T>& loss);
    void clear() { ops_.clear(); }

private:
    bool enabled_;
    std::vector<std::function<void()>> ops_;
};

struct InitRecord {
    std::string distribution;  // "normal" or "constant"
    double a = 0.0;            // std or constant value
    std::uint64_t seed = 0;
};

template <class T>
struct Parameter {
    std::string name;
    Var<T> tensor;
    InitRecord init;
};

/// Zero-mean Gaussian initialisation, seeded per parameter.
template <class T>
Parameter<T> normal_parameter(std::string name, Shape s, double stddev, std::uint64_t seed);
template <class T>
Parameter<T> constant_parameter(std::string name, Shape s, double value);

}  // namespace oxy::nn
