#pragma once

#include <cstdint>
#include <vector>

#include "oxy/nn/layers.hpp"

namespace oxy::gan {

struct GeneratorConfig {
    int rgb_channels = 3;
    int shsi_channels = 24;
    int rgb_stem_channels = 32;
    int shsi_stem_channels = 32;
    int stem_kernel = 7;
    int downsamples = 2;       // stride-2, channel-doubling, per branch; mirrored by the decoder
    int branch_blocks = 2;     // residual blocks per branch
    int fusion_channels = 128; // 1x1 projection after concatenation; 0 keeps the concatenated width
    int trunk_blocks = 4;      // residual blocks after fusion
    int out_channels = 1;
    double init_std = 0.02;

    void validate() const;
    int branch_out(int stem) const { return stem << downsamples; }
    int fused_channels() const { return branch_out(rgb_stem_channels) + branch_out(shsi_stem_channels); }
    int trunk_channels() const { return fusion_channels > 0 ? fusion_channels : fused_channels(); }
    /// Inputs must be divisible by this.
    int size_multiple() const { return 1 << downsamples; }
};

/// Two encoder branches (RGB and sparse spectra), channel concatenation,
/// residual trunk, transposed-conv decoder and a sigmoid head.
template <class T>
class Generator {
public:
    Generator(const GeneratorConfig& cfg, std::uint64_t seed);

    /// rgb: N x rgb_channels x H x W, shsi: N x shsi_channels x H x W -> N x out_channels x H x W in (0,1).
    nn::Var<T> forward(nn::Tape<T>& tape, const nn::Var<T>& rgb, const nn::Var<T>& shsi) const;

    const GeneratorConfig& config() const { return cfg_; }
    std::vector<nn::Parameter<T>*> parameters();

private:
    struct Branch {
        nn::Conv<T> stem;
        nn::InstanceNorm<T> stem_norm;
        std::vector<nn::Conv<T>> down;
        std::vector<nn::InstanceNorm<T>> down_norm;
        std::vector<nn::ResidualBlock<T>> blocks;
    };

    nn::Var<T> encode(nn::Tape<T>& tape, const Branch& b, const nn::Var<T>& x) const;
    Branch make_branch(nn::ParameterFactory<T>& f, const std::string& name, int c_in, int stem) const;

    GeneratorConfig cfg_;
    Branch rgb_;
    Branch shsi_;
    std::vector<nn::Conv<T>> fusion_;  // empty or one 1x1 conv
    std::vector<nn::InstanceNorm<T>> fusion_norm_;
    std::vector<nn::ResidualBlock<T>> trunk_;
    std::vector<nn::Conv<T>> up_;
    std::vector<nn::InstanceNorm<T>> up_norm_;
    nn::Conv<T> head_;
};

}  // namespace oxy::gan
