#include "oxy/gan/loss.hpp"

#include <stdexcept>

namespace oxy::gan {

void LossWeights::validate() const {
    if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
    if (!(bce_clamp > 0 && bce_clamp < 0.5)) throw std::invalid_argument("bce clamp must lie in (0, 0.5)");
}

std::vector<std::uint8_t> effective_pixels(const PixelMask& mask) {
    std::vector<std::uint8_t> out(mask.codes.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask.codes[i] == MaskCode::effective;
    return out;
}

template <class T>
nn::Var<T> masked_l1(nn::Tape<T>& tape, const nn::Var<T>& y_hat, const nn::Var<T>& y, std::span<const std::uint8_t> include) {
    return nn::masked_mean_abs(tape, y_hat, y, include);
}

template <class T>
nn::Var<T> discriminator_loss(nn::Tape<T>& tape, const nn::Var<T>& scores_real, const nn::Var<T>& scores_fake,
                              const LossWeights& w) {
    if (!(scores_real->shape == scores_fake->shape)) throw std::invalid_argument("score maps differ in shape");
    const T clamp = static_cast<T>(w.bce_clamp);
    return nn::add(tape, nn::bce_mean(tape, scores_real, T(1), clamp), nn::bce_mean(tape, scores_fake, T(0), clamp));
}

template <class T>
GeneratorLoss<T> generator_loss(nn::Tape<T>& tape, const nn::Var<T>& scores_fake, const nn::Var<T>& y_hat,
                                const nn::Var<T>& y, std::span<const std::uint8_t> include, const LossWeights& w) {
    w.validate();
    GeneratorLoss<T> out;
    out.adversarial = nn::bce_mean(tape, scores_fake, T(1), static_cast<T>(w.bce_clamp));
    out.l1 = masked_l1(tape, y_hat, y, include);
    out.total = nn::add(tape, out.adversarial, nn::scale(tape, out.l1, static_cast<T>(w.beta)));
    return out;
}

template <class T>
GanLosses<T> gan_losses(nn::Tape<T>& tape, const nn::Var<T>& scores_real, const nn::Var<T>& scores_fake,
                        const nn::Var<T>& y_hat, const nn::Var<T>& y, std::span<const std::uint8_t> include,
                        const LossWeights& w) {
    return {discriminator_loss(tape, scores_real, scores_fake, w), generator_loss(tape, scores_fake, y_hat, y, include, w)};
}

#define OXY_INSTANTIATE(T)                                                                                         \
    template nn::Var<T> masked_l1<T>(nn::Tape<T>&, const nn::Var<T>&, const nn::Var<T>&, std::span<const std::uint8_t>); \
    template nn::Var<T> discriminator_loss<T>(nn::Tape<T>&, const nn::Var<T>&, const nn::Var<T>&, const LossWeights&); \
    template GeneratorLoss<T> generator_loss<T>(nn::Tape<T>&, const nn::Var<T>&, const nn::Var<T>&, const nn::Var<T>&, \
                                                std::span<const std::uint8_t>, const LossWeights&);                  \
    template GanLosses<T> gan_losses<T>(nn::Tape<T>&, const nn::Var<T>&, const nn::Var<T>&, const nn::Var<T>&,       \
                                        const nn::Var<T>&, std::span<const std::uint8_t>, const LossWeights&);
OXY_INSTANTIATE(float)
OXY_INSTANTIATE(double)
#undef OXY_INSTANTIATE

}  // namespace oxy::gan
