#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "s5vh/tensor.hpp"

namespace s5vh::nn {

/// Named handles onto trainable leaves. Tensors are shared handles, so the
/// list aliases the owning module's storage.
using ParameterList = std::vector<std::pair<std::string, Tensor>>;

Tensor parameter(Shape shape, std::vector<double> values, DType dtype);

/// y = x W + b with W stored as (in, out).
class Linear {
public:
    Linear() = default;
    Linear(std::size_t in, std::size_t out, bool with_bias, DType dtype, std::mt19937_64& rng);

    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, ParameterList& out) const;

    std::size_t in_features() const { return weight.dim(0); }
    std::size_t out_features() const { return weight.dim(1); }

    Tensor weight;
    Tensor bias;
};

class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(std::size_t dim, DType dtype);

    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, ParameterList& out) const;

    Tensor gamma;
    Tensor beta;
};

}  // namespace s5vh::nn
