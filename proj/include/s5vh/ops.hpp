#pragma once

#include <cstddef>
#include <vector>

#include "s5vh/tensor.hpp"

// Differentiable primitives. Every op validates shapes and throws ShapeError
// naming the op and the offending shapes.
namespace s5vh::ops {

// Elementwise binary ops. `b` must match `a` or be a trailing suffix of its
// shape (broadcast over the leading axes); the roles may also be swapped.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

/// (..., K) x (K, N) -> (..., N).
Tensor matmul(const Tensor& a, const Tensor& w);
Tensor transpose(const Tensor& a);

Tensor tanh(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);

/// Normalizes over the last axis, then applies gamma/beta of shape (C).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Causal depthwise convolution over time. x: (B, T, C), weight: (C, W),
/// bias: (C). Output step t sees inputs t-W+1 .. t with zero left padding.
Tensor depthwise_conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x, std::size_t axis);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor log_sum_exp(const Tensor& x, std::size_t axis);

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor reverse(const Tensor& x, std::size_t axis);

/// x: (B, T, C) -> (B, T', C), row b taking x[b, index[b][j], :].
Tensor gather_rows(const Tensor& x, const std::vector<std::vector<std::size_t>>& index);
/// Adjoint of gather_rows: places x[b, j, :] at row index[b][j] of a zero
/// (B, length, C) tensor.
Tensor scatter_rows(const Tensor& x, const std::vector<std::vector<std::size_t>>& index,
                    std::size_t length);

/// sign with sign(0) = +1; the backward pass is the identity.
Tensor sign_ste(const Tensor& x);

/// (n, n) -> (n).
Tensor diagonal(const Tensor& x);
/// (B, C), labels[B] -> (B) with out[b] = x[b, labels[b]].
Tensor pick(const Tensor& x, const std::vector<std::size_t>& labels);

}  // namespace s5vh::ops
