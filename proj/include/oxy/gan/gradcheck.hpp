#pragma once

#include <cstdint>

#include "oxy/gan/discriminator.hpp"
#include "oxy/gan/generator.hpp"
#include "oxy/gan/loss.hpp"
#include "oxy/nn/gradcheck.hpp"

namespace oxy::gan {

/// Finite-difference check of beta * masked L1 through the whole generator
/// (64-bit, random inputs of the given square size, a third of the pixels excluded).
nn::GradCheckReport generator_l1_check(const GeneratorConfig& cfg, int size, std::uint64_t seed, double tolerance = 1e-3,
                                       std::size_t coords_per_tensor = 4);

/// Same, for the full generator objective BCE(D(x, G(x)), 1) + beta * L1; the
/// input must be large enough for the patch stack.
nn::GradCheckReport generator_objective_check(const GeneratorConfig& gcfg, const DiscriminatorConfig& dcfg, int size,
                                              std::uint64_t seed, double tolerance = 1e-3, std::size_t coords_per_tensor = 3);

}  // namespace oxy::gan
