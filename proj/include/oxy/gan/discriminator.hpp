#pragma once

#include <cstdint>
#include <vector>

#include "oxy/nn/layers.hpp"

namespace oxy::gan {

struct DiscriminatorConfig {
    int in_channels = 3 + 24 + 1;  // condition (RGB + sHSI) and the StO2 map
    std::vector<int> channels{64, 128, 256, 512};
    std::vector<int> strides{2, 2, 2, 1};
    int kernel = 4;
    int pad = 1;
    double slope = 0.2;
    bool norm = true;  // instance norm on every layer but the first
    double init_std = 0.02;

    void validate() const;
    /// Input pixels seen by one output unit.
    int receptive_field() const;
    /// Per-layer spatial sizes starting from `input`, final score map last.
    std::vector<int> size_chain(int input) const;
};

/// Conditional patch discriminator ending in a one-channel sigmoid score map.
template <class T>
class Discriminator {
public:
    Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed);

    /// Scores concat(condition..., y); condition tensors are joined in order.
    nn::Var<T> forward(nn::Tape<T>& tape, const std::vector<nn::Var<T>>& condition, const nn::Var<T>& y) const;

    const DiscriminatorConfig& config() const { return cfg_; }
    std::vector<nn::Parameter<T>*> parameters();

private:
    DiscriminatorConfig cfg_;
    std::vector<nn::Conv<T>> convs_;
    std::vector<nn::InstanceNorm<T>> norms_;  // one per conv after the first
    nn::Conv<T> head_;
};

}  // namespace oxy::gan
