#include "oxy/gan/discriminator.hpp"

#include <stdexcept>
#include <string>

namespace oxy::gan {

void DiscriminatorConfig::validate() const {
    if (in_channels < 1 || channels.empty() || channels.size() != strides.size()) {
        throw std::invalid_argument("discriminator needs matching channel and stride lists");
    }
    for (std::size_t i = 0; i < channels.size(); ++i) {
        if (channels[i] < 1 || strides[i] < 1) throw std::invalid_argument("discriminator channels and strides must be positive");
    }
    if (kernel < 1 || pad < 0 || !(slope >= 0) || !(init_std > 0)) throw std::invalid_argument("invalid discriminator layer constants");
}

int DiscriminatorConfig::receptive_field() const {
    // walk back from one output unit: r_in = (r_out - 1) * s + k; the head has stride 1
    int r = 1;
    r = (r - 1) * 1 + kernel;
    for (auto it = strides.rbegin(); it != strides.rend(); ++it) r = (r - 1) * *it + kernel;
    return r;
}

std::vector<int> DiscriminatorConfig::size_chain(int input) const {
    std::vector<int> out{input};
    int s = input;
    for (int stride : strides) {
        s = (s + 2 * pad - kernel) / stride + 1;
        out.push_back(s);
    }
    out.push_back((s + 2 * pad - kernel) + 1);
    return out;
}

template <class T>
Discriminator<T>::Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    nn::ParameterFactory<T> f(seed, cfg_.init_std);
    int c = cfg_.in_channels;
    for (std::size_t i = 0; i < cfg_.channels.size(); ++i) {
        const std::string name = "d.conv" + std::to_string(i);
        const bool normed = i > 0 && cfg_.norm;
        convs_.push_back(f.conv(name, c, cfg_.channels[i], cfg_.kernel, cfg_.strides[i], cfg_.pad, !normed));
        if (normed) norms_.push_back(f.norm(name + "_norm", cfg_.channels[i]));
        c = cfg_.channels[i];
    }
    head_ = f.conv("d.head", c, 1, cfg_.kernel, 1, cfg_.pad);
}

template <class T>
nn::Var<T> Discriminator<T>::forward(nn::Tape<T>& tape, const std::vector<nn::Var<T>>& condition, const nn::Var<T>& y) const {
    nn::Var<T> h = y;
    for (auto it = condition.rbegin(); it != condition.rend(); ++it) h = nn::concat_channels(tape, *it, h);
    if (h->shape.c != cfg_.in_channels) {
        throw std::invalid_argument("discriminator expects " + std::to_string(cfg_.in_channels) + " channels, got " +
                                    std::to_string(h->shape.c));
    }
    const auto chain_h = cfg_.size_chain(h->shape.h);
    const auto chain_w = cfg_.size_chain(h->shape.w);
    if (chain_h.back() < 1 || chain_w.back() < 1) {
        throw std::invalid_argument("discriminator input " + h->shape.str() + " too small for the patch stack");
    }
    const T slope = static_cast<T>(cfg_.slope);
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        h = convs_[i](tape, h);
        if (i > 0 && cfg_.norm) h = norms_[i - 1](tape, h);
        h = nn::leaky_relu(tape, h, slope);
    }
    return nn::sigmoid(tape, head_(tape, h));
}

template <class T>
std::vector<nn::Parameter<T>*> Discriminator<T>::parameters() {
    std::vector<nn::Parameter<T>*> out;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        nn::collect(out, convs_[i]);
        if (i > 0 && cfg_.norm) nn::collect(out, norms_[i - 1]);
    }
    nn::collect(out, head_);
    return out;
}

template class Discriminator<float>;
template class Discriminator<double>;

}  // namespace oxy::gan
