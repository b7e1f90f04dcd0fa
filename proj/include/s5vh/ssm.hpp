#pragma once

#include <random>
#include <string>
#include <vector>

#include "s5vh/nn.hpp"
#include "s5vh/tensor.hpp"

namespace s5vh::ssm {

/// Zero-order-hold discretization of one diagonal state entry.
struct ZohCoefficients {
    double decay;  // exp(delta * a)
    double input;  // (delta * a)^-1 (exp(delta * a) - 1) * delta * b
};

/// |delta * a| below this uses the second-order series for the input term.
inline constexpr double kSeriesThreshold = 1e-4;

ZohCoefficients discretize(double a, double b, double delta);

/// Hidden state carried across time steps: channels x state_size.
struct ScanState {
    ScanState(std::size_t channels, std::size_t state_size)
        : channels(channels), state_size(state_size), h(channels * state_size, 0.0) {}

    std::size_t channels;
    std::size_t state_size;
    std::vector<double> h;
};

/// Selective scan with input-dependent timescale and projections.
///   u:     (B, T, E)  input sequence
///   delta: (B, T, E)  positive timescales
///   a:     (E, N)     diagonal state entries (negative)
///   b, c:  (B, T, N)  per-step input/output maps
/// h_t = exp(delta_t a) h_{t-1} + zoh_input(a, delta_t) b_t u_t,
/// y_t = <c_t, h_t>, with h_0 = 0. Returns y: (B, T, E).
Tensor selective_scan(const Tensor& u, const Tensor& delta, const Tensor& a, const Tensor& b, const Tensor& c);

struct MambaConfig {
    std::size_t state_size = 16;
    std::size_t conv_width = 4;
    std::size_t expand = 2;
    std::size_t dt_rank = 0;  // 0 selects ceil(d_model / 16)
    double dt_min = 1e-3;
    double dt_max = 1e-1;
};

enum class Direction { Forward, Backward };

/// Gated two-branch block:
///   main = LN2(scan(silu(conv(in_proj(LN1(x))))))
///   gate = silu(gate_proj(x))
///   out  = out_proj(main * gate)
/// The backward direction runs the same computation on the time-reversed
/// input and reverses the result.
class MambaBlock {
public:
    MambaBlock() = default;
    MambaBlock(std::size_t d_model, const MambaConfig& config, Direction direction, DType dtype,
               std::mt19937_64& rng);

    Tensor forward(const Tensor& x) const;
    /// The block's computation without any time reversal.
    Tensor forward_scan(const Tensor& x) const;
    void collect(const std::string& prefix, nn::ParameterList& out) const;

    Direction direction = Direction::Forward;
    std::size_t d_model = 0;
    std::size_t d_inner = 0;
    std::size_t state_size = 0;
    std::size_t dt_rank = 0;

    nn::LayerNorm norm_in;
    nn::LayerNorm norm_scan;
    nn::Linear in_proj;
    nn::Linear gate_proj;
    nn::Linear out_proj;
    nn::Linear x_proj;   // d_inner -> dt_rank + 2 N (delta seed, B, C)
    nn::Linear dt_proj;  // dt_rank -> d_inner
    Tensor conv_weight;  // (d_inner, width)
    Tensor conv_bias;    // (d_inner)
    Tensor a_log;        // (d_inner, N); a = -exp(a_log)
};

/// S_out = forward(S_in) + backward(S_in) (+ S_in when residual).
class BidirectionalLayer {
public:
    BidirectionalLayer() = default;
    BidirectionalLayer(std::size_t d_model, const MambaConfig& config, bool residual, DType dtype,
                       std::mt19937_64& rng);

    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, nn::ParameterList& out) const;

    MambaBlock forward_block;
    MambaBlock backward_block;
    bool residual = true;
};

/// Input projection followed by a stack of bidirectional layers, with an
/// optional output projection.
class TemporalStack {
public:
    TemporalStack() = default;
    TemporalStack(std::size_t in_dim, std::size_t d_model, std::size_t layers, std::size_t out_dim,
                  const MambaConfig& config, bool residual, DType dtype, std::mt19937_64& rng);

    /// x: (B, T, in_dim) -> (B, T, out_dim or d_model).
    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, nn::ParameterList& out) const;

    std::size_t in_dim() const { return input.in_features(); }

    nn::Linear input;
    std::vector<BidirectionalLayer> layers;
    nn::Linear output;  // undefined weight when absent
};

}  // namespace s5vh::ssm
