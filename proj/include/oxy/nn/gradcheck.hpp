#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "oxy/nn/tensor.hpp"

namespace oxy::nn {

struct GradCheckOptions {
    double eps = 1e-4;
    double tolerance = 1e-4;
    std::size_t max_coords = 48;  // per input tensor; sampled when larger
    double floor = 1e-6;          // denominator floor for near-zero gradients
    std::uint64_t seed = 0;
};

struct GradCheckReport {
    std::string name;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    std::size_t coordinates = 0;
    // location of the largest error: input index, element, tape and FD gradients
    std::size_t worst_input = 0;
    std::size_t worst_element = 0;
    double worst_grad = 0.0;
    double worst_fd = 0.0;

    bool passed() const { return max_rel_error < tolerance; }
};

/// Builds a scalar loss from the inputs on the given tape. It is called once
/// with a recording tape and then repeatedly with a disabled one.
using LossBuilder = std::function<Var<double>(Tape<double>&)>;

/// Compares tape gradients of `loss` w.r.t. every input against central
/// differences: |g - fd| / max(|g|, |fd|, floor), maximised over coordinates.
GradCheckReport grad_check(const std::string& name, const std::vector<Var<double>>& inputs, const LossBuilder& loss,
                           const GradCheckOptions& opt);

/// One check per differentiable op, on random 64-bit inputs.
std::vector<GradCheckReport> kernel_suite(std::uint64_t seed, double tolerance = 1e-4);

}  // namespace oxy::nn
