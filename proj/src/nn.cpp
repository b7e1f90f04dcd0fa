#include "s5vh/nn.hpp"

#include <cmath>

#include "s5vh/ops.hpp"
#include "s5vh/rng.hpp"

namespace s5vh::nn {

Tensor parameter(Shape shape, std::vector<double> values, DType dtype) {
    return Tensor::from(std::move(shape), std::move(values), dtype, true);
}

Linear::Linear(std::size_t in, std::size_t out, bool with_bias, DType dtype, std::mt19937_64& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::vector<double> w(in * out);
    for (auto& v : w) v = uniform(rng, -bound, bound);
    weight = parameter({in, out}, std::move(w), dtype);
    if (with_bias) bias = parameter({out}, std::vector<double>(out, 0.0), dtype);
}

Tensor Linear::forward(const Tensor& x) const {
    Tensor y = ops::matmul(x, weight);
    return bias.defined() ? ops::add(y, bias) : y;
}

void Linear::collect(const std::string& prefix, ParameterList& out) const {
    out.emplace_back(prefix + ".weight", weight);
    if (bias.defined()) out.emplace_back(prefix + ".bias", bias);
}

LayerNorm::LayerNorm(std::size_t dim, DType dtype)
    : gamma(parameter({dim}, std::vector<double>(dim, 1.0), dtype)),
      beta(parameter({dim}, std::vector<double>(dim, 0.0), dtype)) {}

Tensor LayerNorm::forward(const Tensor& x) const { return ops::layer_norm(x, gamma, beta, 1e-5); }

void LayerNorm::collect(const std::string& prefix, ParameterList& out) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
}

}  // namespace s5vh::nn
