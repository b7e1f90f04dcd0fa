#pragma once

#include <functional>
#include <vector>

#include "s5vh/tensor.hpp"

namespace s5vh {

using ScalarFunction = std::function<Tensor(const std::vector<Tensor>&)>;

/// Compares reverse-mode gradients of a scalar function against central
/// differences. Inputs must be F64 leaves with requires_grad set; they are
/// perturbed in place and restored. Returns
/// max |analytic - numeric| / max(1, |numeric|) over every input entry.
double grad_check(const ScalarFunction& f, std::vector<Tensor> inputs, double eps = 1e-5);

}  // namespace s5vh

#include <cstdint>
#include <string>

namespace s5vh {

struct GradCase {
    std::string name;
    ScalarFunction f;
    std::vector<Tensor> inputs;
};

/// Gradient checks over every differentiable primitive, the three training
/// losses, the SSM blocks and a full model step on a two-video batch. The
/// sign op is excluded: its straight-through backward is not the derivative
/// of sign, and the model case therefore scores the pooled soft codes.
std::vector<GradCase> gradient_suite(std::uint64_t seed);

}  // namespace s5vh
