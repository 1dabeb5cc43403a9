#include "oxy/gan/generator.hpp"

#include <stdexcept>
#include <string>

namespace oxy::gan {

void GeneratorConfig::validate() const {
    if (rgb_channels < 1 || shsi_channels < 1 || rgb_stem_channels < 1 || shsi_stem_channels < 1 || out_channels < 1) {
        throw std::invalid_argument("generator channel counts must be positive");
    }
    if (stem_kernel < 1 || stem_kernel % 2 == 0) throw std::invalid_argument("generator stem kernel must be odd");
    if (downsamples < 0 || downsamples > 6) throw std::invalid_argument("generator downsamples out of range");
    if (branch_blocks < 0 || trunk_blocks < 0 || fusion_channels < 0) throw std::invalid_argument("negative generator depth");
    if (trunk_channels() >> downsamples < 1) throw std::invalid_argument("trunk too narrow for the decoder");
    if (!(init_std > 0)) throw std::invalid_argument("init_std must be positive");
}

template <class T>
typename Generator<T>::Branch Generator<T>::make_branch(nn::ParameterFactory<T>& f, const std::string& name, int c_in,
                                                        int stem) const {
    Branch b;
    b.stem = f.conv(name + ".stem", c_in, stem, cfg_.stem_kernel, 1, cfg_.stem_kernel / 2, false);
    b.stem_norm = f.norm(name + ".stem_norm", stem);
    int c = stem;
    for (int i = 0; i < cfg_.downsamples; ++i) {
        b.down.push_back(f.conv(name + ".down" + std::to_string(i), c, 2 * c, 3, 2, 1, false));
        b.down_norm.push_back(f.norm(name + ".down" + std::to_string(i) + "_norm", 2 * c));
        c *= 2;
    }
    for (int i = 0; i < cfg_.branch_blocks; ++i) b.blocks.push_back(f.residual(name + ".res" + std::to_string(i), c));
    return b;
}

template <class T>
Generator<T>::Generator(const GeneratorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    nn::ParameterFactory<T> f(seed, cfg_.init_std);
    rgb_ = make_branch(f, "g.rgb", cfg_.rgb_channels, cfg_.rgb_stem_channels);
    shsi_ = make_branch(f, "g.shsi", cfg_.shsi_channels, cfg_.shsi_stem_channels);
    int c = cfg_.fused_channels();
    if (cfg_.fusion_channels > 0) {
        fusion_.push_back(f.conv("g.fusion", c, cfg_.fusion_channels, 1, 1, 0, false));
        fusion_norm_.push_back(f.norm("g.fusion_norm", cfg_.fusion_channels));
        c = cfg_.fusion_channels;
    }
    for (int i = 0; i < cfg_.trunk_blocks; ++i) trunk_.push_back(f.residual("g.trunk" + std::to_string(i), c));
    for (int i = 0; i < cfg_.downsamples; ++i) {
        up_.push_back(f.conv_transpose("g.up" + std::to_string(i), c, c / 2, 4, 2, 1, false));
        up_norm_.push_back(f.norm("g.up" + std::to_string(i) + "_norm", c / 2));
        c /= 2;
    }
    head_ = f.conv("g.head", c, cfg_.out_channels, cfg_.stem_kernel, 1, cfg_.stem_kernel / 2);
}

template <class T>
nn::Var<T> Generator<T>::encode(nn::Tape<T>& tape, const Branch& b, const nn::Var<T>& x) const {
    auto h = nn::relu(tape, b.stem_norm(tape, b.stem(tape, x)));
    for (std::size_t i = 0; i < b.down.size(); ++i) h = nn::relu(tape, b.down_norm[i](tape, b.down[i](tape, h)));
    for (const auto& block : b.blocks) h = block(tape, h);
    return h;
}

template <class T>
nn::Var<T> Generator<T>::forward(nn::Tape<T>& tape, const nn::Var<T>& rgb, const nn::Var<T>& shsi) const {
    const auto& a = rgb->shape;
    const auto& s = shsi->shape;
    if (a.c != cfg_.rgb_channels || s.c != cfg_.shsi_channels || a.n != s.n || a.h != s.h || a.w != s.w) {
        throw std::invalid_argument("generator input mismatch: rgb " + a.str() + ", shsi " + s.str());
    }
    const int m = cfg_.size_multiple();
    if (a.h % m != 0 || a.w % m != 0 || (a.h >> cfg_.downsamples) * (a.w >> cfg_.downsamples) < 2) {
        throw std::invalid_argument("generator input " + a.str() + " must have sides divisible by " + std::to_string(m));
    }
    auto h = nn::concat_channels(tape, encode(tape, rgb_, rgb), encode(tape, shsi_, shsi));
    if (!fusion_.empty()) h = nn::relu(tape, fusion_norm_[0](tape, fusion_[0](tape, h)));
    for (const auto& block : trunk_) h = block(tape, h);
    for (std::size_t i = 0; i < up_.size(); ++i) h = nn::relu(tape, up_norm_[i](tape, up_[i](tape, h)));
    return nn::sigmoid(tape, head_(tape, h));
}

template <class T>
std::vector<nn::Parameter<T>*> Generator<T>::parameters() {
    std::vector<nn::Parameter<T>*> out;
    for (Branch* b : {&rgb_, &shsi_}) {
        nn::collect(out, b->stem);
        nn::collect(out, b->stem_norm);
        for (std::size_t i = 0; i < b->down.size(); ++i) {
            nn::collect(out, b->down[i]);
            nn::collect(out, b->down_norm[i]);
        }
        for (auto& block : b->blocks) nn::collect(out, block);
    }
    for (std::size_t i = 0; i < fusion_.size(); ++i) {
        nn::collect(out, fusion_[i]);
        nn::collect(out, fusion_norm_[i]);
    }
    for (auto& block : trunk_) nn::collect(out, block);
    for (std::size_t i = 0; i < up_.size(); ++i) {
        nn::collect(out, up_[i]);
        nn::collect(out, up_norm_[i]);
    }
    nn::collect(out, head_);
    return out;
}

template class Generator<float>;
template class Generator<double>;

}  // namespace oxy::gan
