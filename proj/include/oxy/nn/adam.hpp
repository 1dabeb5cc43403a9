#pragma once

#include <cstdint>
#include <vector>

#include "oxy/nn/tensor.hpp"

namespace oxy::nn {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

template <class T>
struct AdamState {
    std::int64_t t = 0;
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
};

/// Bias-corrected Adam over a fixed parameter list.
template <class T>
class Adam {
public:
    Adam(std::vector<Parameter<T>*> params, AdamConfig cfg);

    /// Applies one update from the accumulated gradients. A non-finite
    /// gradient anywhere skips the whole step and returns false.
    bool step();
    void zero_grad();

    const AdamConfig& config() const { return cfg_; }
    const std::vector<Parameter<T>*>& parameters() const { return params_; }
    AdamState<T>& state() { return state_; }
    const AdamState<T>& state() const { return state_; }
    std::int64_t skipped() const { return skipped_; }

private:
    std::vector<Parameter<T>*> params_;
    AdamConfig cfg_;
    AdamState<T> state_;
    std::int64_t skipped_ = 0;
};

}  // namespace oxy::nn
