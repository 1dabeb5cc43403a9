#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oxy/hypercube.hpp"
#include "oxy/nn/ops.hpp"

namespace oxy::gan {

struct LossWeights {
    double beta = 400.0;  // L1 weight
    double bce_clamp = 1e-7;

    void validate() const;
};

/// 1 for effective pixels, 0 for every excluded code.
std::vector<std::uint8_t> effective_pixels(const PixelMask& mask);

/// Mean |y_hat - y| over included pixels; excluded pixels get neither loss nor gradient.
template <class T>
nn::Var<T> masked_l1(nn::Tape<T>& tape, const nn::Var<T>& y_hat, const nn::Var<T>& y, std::span<const std::uint8_t> include);

/// BCE(real, 1) + BCE(fake, 0).
template <class T>
nn::Var<T> discriminator_loss(nn::Tape<T>& tape, const nn::Var<T>& scores_real, const nn::Var<T>& scores_fake,
                              const LossWeights& w);

template <class T>
struct GeneratorLoss {
    nn::Var<T> total;  // adversarial + beta * l1
    nn::Var<T> adversarial;
    nn::Var<T> l1;
};

/// BCE(fake, 1) + beta * masked L1.
template <class T>
GeneratorLoss<T> generator_loss(nn::Tape<T>& tape, const nn::Var<T>& scores_fake, const nn::Var<T>& y_hat,
                                const nn::Var<T>& y, std::span<const std::uint8_t> include, const LossWeights& w);

template <class T>
struct GanLosses {
    nn::Var<T> loss_d;
    GeneratorLoss<T> loss_g;
};

template <class T>
GanLosses<T> gan_losses(nn::Tape<T>& tape, const nn::Var<T>& scores_real, const nn::Var<T>& scores_fake,
                        const nn::Var<T>& y_hat, const nn::Var<T>& y, std::span<const std::uint8_t> include,
                        const LossWeights& w);

}  // namespace oxy::gan
