#include "oxy/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace oxy::nn {

void AdamConfig::validate() const {
    if (!(lr > 0) || !(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(eps > 0)) {
        throw std::invalid_argument("invalid Adam hyperparameters");
    }
}

template <class T>
Adam<T>::Adam(std::vector<Parameter<T>*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    for (auto* p : params_) {
        if (!p->tensor->requires_grad) throw std::invalid_argument("parameter " + p->name + " does not track gradients");
        state_.m.emplace_back(p->tensor->value.size(), T(0));
        state_.v.emplace_back(p->tensor->value.size(), T(0));
    }
}

template <class T>
bool Adam<T>::step() {
    if (state_.m.size() != params_.size()) throw std::logic_error("Adam state does not match its parameters");
    for (auto* p : params_) {
        for (T g : p->tensor->grad) {
            if (!std::isfinite(g)) {
                ++skipped_;
                return false;
            }
        }
    }
    ++state_.t;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(state_.t));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(state_.t));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T step_size = static_cast<T>(cfg_.lr / c1);
    const T inv_c2 = static_cast<T>(1.0 / c2);
    const T eps = static_cast<T>(cfg_.eps);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& w = params_[k]->tensor->value;
        const auto& g = params_[k]->tensor->grad;
        auto& m = state_.m[k];
        auto& v = state_.v[k];
        if (m.size() != w.size() || v.size() != w.size()) throw std::logic_error("Adam moment shape mismatch for " + params_[k]->name);
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (T(1) - b1) * g[i];
            v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
            w[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
        }
    }
    return true;
}

template <class T>
void Adam<T>::zero_grad() {
    for (auto* p : params_) p->tensor->zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace oxy::nn
