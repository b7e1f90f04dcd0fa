#include "s5vh/ssm.hpp"

#include <cmath>

#include "s5vh/ops.hpp"
#include "s5vh/rng.hpp"

namespace s5vh::ssm {

namespace {

// decay = exp(delta a) and input factor f = expm1(delta a) / a, so that
// b_bar = f * b; a first-order series for f near delta a = 0.
inline void zoh_factors(double a, double delta, double& decay, double& f) {
    const double z = delta * a;
    if (std::abs(z) < kSeriesThreshold) {
        decay = std::exp(z);
        f = delta * (1.0 + 0.5 * z);
    } else {
        const double em1 = std::expm1(z);
        decay = em1 + 1.0;
        f = em1 / a;
    }
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeError("selective_scan: " + what);
}

}  // namespace

ZohCoefficients discretize(double a, double b, double delta) {
    double decay, f;
    zoh_factors(a, delta, decay, f);
    return {decay, f * b};
}

Tensor selective_scan(const Tensor& u, const Tensor& delta, const Tensor& a, const Tensor& b, const Tensor& c) {
    require(u.rank() == 3, "input must be (B, T, E), got " + to_string(u.shape()));
    const std::size_t nb = u.dim(0), nt = u.dim(1), ne = u.dim(2);
    require(nt >= 1, "empty sequence");
    require(delta.shape() == u.shape(), "delta " + to_string(delta.shape()) + " vs input " + to_string(u.shape()));
    require(a.rank() == 2 && a.dim(0) == ne, "state matrix " + to_string(a.shape()) + " vs input " + to_string(u.shape()));
    const std::size_t ns = a.dim(1);
    const Shape bc_shape{nb, nt, ns};
    require(b.shape() == bc_shape, "B " + to_string(b.shape()) + " expected " + to_string(bc_shape));
    require(c.shape() == bc_shape, "C " + to_string(c.shape()) + " expected " + to_string(bc_shape));

    auto ud = u.data();
    auto dd = delta.data();
    auto ad = a.data();
    auto bd = b.data();
    auto cd = c.data();

    // hidden states and ZOH factors are kept for the backward pass only when
    // a gradient will be taken
    const bool keep = will_record({u, delta, a, b, c});
    const std::size_t cells = keep ? nb * nt * ne * ns : 0;
    auto hist = std::make_shared<std::vector<double>>(cells);
    auto decay_hist = std::make_shared<std::vector<double>>(cells);
    auto f_hist = std::make_shared<std::vector<double>>(cells);
    std::vector<double> y(nb * nt * ne, 0.0);
    ScanState state(ne, ns);
    for (std::size_t bi = 0; bi < nb; ++bi) {
        std::fill(state.h.begin(), state.h.end(), 0.0);
        for (std::size_t t = 0; t < nt; ++t) {
            const std::size_t row = bi * nt + t;
            const double* bt = bd.data() + row * ns;
            const double* ct = cd.data() + row * ns;
            for (std::size_t e = 0; e < ne; ++e) {
                const double x = ud[row * ne + e];
                const double dt = dd[row * ne + e];
                const double* ae = ad.data() + e * ns;
                double* h = state.h.data() + e * ns;
                double acc = 0.0;
                for (std::size_t n = 0; n < ns; ++n) {
                    double decay, f;
                    zoh_factors(ae[n], dt, decay, f);
                    h[n] = decay * h[n] + f * bt[n] * x;
                    acc += ct[n] * h[n];
                    if (keep) {
                        const std::size_t k = (row * ne + e) * ns + n;
                        (*decay_hist)[k] = decay;
                        (*f_hist)[k] = f;
                    }
                }
                y[row * ne + e] = acc;
            }
            if (keep) {
                std::copy(state.h.begin(), state.h.end(), hist->begin() + static_cast<std::ptrdiff_t>(row * ne * ns));
            }
        }
    }

    return emit(u.shape(), std::move(y), {u, delta, a, b, c},
                [u, delta, a, b, c, hist, decay_hist, f_hist, nb, nt, ne, ns](std::span<const double> gy) {
                    auto gu = grad_target(u);
                    auto gd = grad_target(delta);
                    auto ga = grad_target(a);
                    auto gb = grad_target(b);
                    auto gc = grad_target(c);
                    auto ud = u.data();
                    auto dd = delta.data();
                    auto ad = a.data();
                    auto bd = b.data();
                    auto cd = c.data();
                    // scratch for whichever gradients are not wanted
                    std::vector<double> sink_u, sink_d, sink_a, sink_b, sink_c;
                    auto or_sink = [](std::span<double> g, std::vector<double>& sink, std::size_t size) {
                        if (!g.empty()) return g.data();
                        sink.assign(size, 0.0);
                        return sink.data();
                    };
                    double* pu = or_sink(gu, sink_u, ud.size());
                    double* pd = or_sink(gd, sink_d, dd.size());
                    double* pa = or_sink(ga, sink_a, ad.size());
                    double* pb = or_sink(gb, sink_b, bd.size());
                    double* pc = or_sink(gc, sink_c, cd.size());
                    std::vector<double> dh(ne * ns);
                    for (std::size_t bi = 0; bi < nb; ++bi) {
                        std::fill(dh.begin(), dh.end(), 0.0);
                        for (std::size_t t = nt; t-- > 0;) {
                            const std::size_t row = bi * nt + t;
                            const double* h_now = hist->data() + row * ne * ns;
                            const double* h_prev = t > 0 ? hist->data() + (row - 1) * ne * ns : nullptr;
                            const double* decay = decay_hist->data() + row * ne * ns;
                            const double* fz = f_hist->data() + row * ne * ns;
                            const double* bt = bd.data() + row * ns;
                            const double* ct = cd.data() + row * ns;
                            double* gbt = pb + row * ns;
                            double* gct = pc + row * ns;
                            for (std::size_t e = 0; e < ne; ++e) {
                                const double x = ud[row * ne + e];
                                const double dt = dd[row * ne + e];
                                const double gye = gy[row * ne + e];
                                double gu_acc = 0.0, gd_acc = 0.0;
                                for (std::size_t n = 0; n < ns; ++n) {
                                    const std::size_t k = e * ns + n;
                                    const double an = ad[k];
                                    const double z = dt * an;
                                    double& g = dh[k];
                                    g += ct[n] * gye;
                                    gct[n] += gye * h_now[k];
                                    const double hp = h_prev ? h_prev[k] : 0.0;
                                    const double g_decay = g * hp;
                                    const double g_input = g * x * bt[n];  // d/df
                                    // partials of f = expm1(dt a) / a (or its series)
                                    double df_ddt, df_da;
                                    if (std::abs(z) < kSeriesThreshold) {
                                        df_ddt = 1.0 + z;
                                        df_da = 0.5 * dt * dt;
                                    } else {
                                        df_ddt = decay[k];
                                        df_da = (z * decay[k] - an * fz[k]) / (an * an);
                                    }
                                    gu_acc += g * fz[k] * bt[n];
                                    gbt[n] += g * x * fz[k];
                                    gd_acc += g_decay * an * decay[k] + g_input * df_ddt;
                                    pa[k] += g_decay * dt * decay[k] + g_input * df_da;
                                    g *= decay[k];
                                }
                                pu[row * ne + e] += gu_acc;
                                pd[row * ne + e] += gd_acc;
                            }
                        }
                    }
                });
}

MambaBlock::MambaBlock(std::size_t d_model, const MambaConfig& config, Direction direction, DType dtype,
                       std::mt19937_64& rng)
    : direction(direction),
      d_model(d_model),
      d_inner(config.expand * d_model),
      state_size(config.state_size),
      dt_rank(config.dt_rank ? config.dt_rank : (d_model + 15) / 16) {
    if (d_model == 0 || config.expand == 0 || config.state_size == 0 || config.conv_width == 0) {
        throw Error("MambaBlock: dimensions must be positive");
    }
    norm_in = nn::LayerNorm(d_model, dtype);
    norm_scan = nn::LayerNorm(d_inner, dtype);
    in_proj = nn::Linear(d_model, d_inner, true, dtype, rng);
    gate_proj = nn::Linear(d_model, d_inner, true, dtype, rng);
    out_proj = nn::Linear(d_inner, d_model, true, dtype, rng);
    x_proj = nn::Linear(d_inner, dt_rank + 2 * state_size, false, dtype, rng);
    dt_proj = nn::Linear(dt_rank, d_inner, true, dtype, rng);

    // dt bias = softplus^-1 of a log-uniform timescale in [dt_min, dt_max]
    std::vector<double> dt_bias(d_inner);
    for (auto& v : dt_bias) {
        double dt = std::exp(uniform(rng, std::log(config.dt_min), std::log(config.dt_max)));
        v = dt + std::log(-std::expm1(-dt));
    }
    dt_proj.bias = nn::parameter({d_inner}, std::move(dt_bias), dtype);

    const std::size_t width = config.conv_width;
    double bound = 1.0 / std::sqrt(static_cast<double>(width));
    std::vector<double> cw(d_inner * width);
    for (auto& v : cw) v = uniform(rng, -bound, bound);
    conv_weight = nn::parameter({d_inner, width}, std::move(cw), dtype);
    conv_bias = nn::parameter({d_inner}, std::vector<double>(d_inner, 0.0), dtype);

    // a_n = -(n + 1) for every channel
    std::vector<double> al(d_inner * state_size);
    for (std::size_t e = 0; e < d_inner; ++e)
        for (std::size_t n = 0; n < state_size; ++n) al[e * state_size + n] = std::log(static_cast<double>(n + 1));
    a_log = nn::parameter({d_inner, state_size}, std::move(al), dtype);
}

Tensor MambaBlock::forward_scan(const Tensor& x) const {
    if (x.rank() != 3 || x.dim(2) != d_model) {
        throw ShapeError("mamba_block: expected (B, T, " + std::to_string(d_model) + "), got " + to_string(x.shape()));
    }
    Tensor h = in_proj.forward(norm_in.forward(x));
    Tensor u = ops::silu(ops::depthwise_conv1d(h, conv_weight, conv_bias));
    Tensor proj = x_proj.forward(u);
    Tensor dt_seed = ops::slice(proj, 2, 0, dt_rank);
    Tensor bm = ops::slice(proj, 2, dt_rank, state_size);
    Tensor cm = ops::slice(proj, 2, dt_rank + state_size, state_size);
    Tensor delta = ops::softplus(dt_proj.forward(dt_seed));
    Tensor a = ops::scale(ops::exp(a_log), -1.0);
    Tensor main = norm_scan.forward(selective_scan(u, delta, a, bm, cm));
    Tensor gate = ops::silu(gate_proj.forward(x));
    return out_proj.forward(ops::mul(main, gate));
}

Tensor MambaBlock::forward(const Tensor& x) const {
    if (direction == Direction::Forward) return forward_scan(x);
    return ops::reverse(forward_scan(ops::reverse(x, 1)), 1);
}

void MambaBlock::collect(const std::string& prefix, nn::ParameterList& out) const {
    norm_in.collect(prefix + ".norm_in", out);
    in_proj.collect(prefix + ".in_proj", out);
    out.emplace_back(prefix + ".conv.weight", conv_weight);
    out.emplace_back(prefix + ".conv.bias", conv_bias);
    x_proj.collect(prefix + ".x_proj", out);
    dt_proj.collect(prefix + ".dt_proj", out);
    out.emplace_back(prefix + ".a_log", a_log);
    norm_scan.collect(prefix + ".norm_scan", out);
    gate_proj.collect(prefix + ".gate_proj", out);
    out_proj.collect(prefix + ".out_proj", out);
}

BidirectionalLayer::BidirectionalLayer(std::size_t d_model, const MambaConfig& config, bool residual, DType dtype,
                                       std::mt19937_64& rng)
    : forward_block(d_model, config, Direction::Forward, dtype, rng),
      backward_block(d_model, config, Direction::Backward, dtype, rng),
      residual(residual) {}

Tensor BidirectionalLayer::forward(const Tensor& x) const {
    Tensor out = ops::add(forward_block.forward(x), backward_block.forward(x));
    return residual ? ops::add(out, x) : out;
}

void BidirectionalLayer::collect(const std::string& prefix, nn::ParameterList& out) const {
    forward_block.collect(prefix + ".forward", out);
    backward_block.collect(prefix + ".backward", out);
}

TemporalStack::TemporalStack(std::size_t in_dim, std::size_t d_model, std::size_t n_layers, std::size_t out_dim,
                             const MambaConfig& config, bool residual, DType dtype, std::mt19937_64& rng)
    : input(in_dim, d_model, true, dtype, rng) {
    layers.reserve(n_layers);
    for (std::size_t i = 0; i < n_layers; ++i) layers.emplace_back(d_model, config, residual, dtype, rng);
    if (out_dim) output = nn::Linear(d_model, out_dim, true, dtype, rng);
}

Tensor TemporalStack::forward(const Tensor& x) const {
    if (x.rank() != 3 || x.dim(2) != in_dim()) {
        throw ShapeError("temporal stack: expected (B, T, " + std::to_string(in_dim()) + "), got " +
                         to_string(x.shape()));
    }
    Tensor h = input.forward(x);
    for (const auto& layer : layers) h = layer.forward(h);
    return output.weight.defined() ? output.forward(h) : h;
}

void TemporalStack::collect(const std::string& prefix, nn::ParameterList& out) const {
    input.collect(prefix + ".input", out);
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + ".layers." + std::to_string(i), out);
    if (output.weight.defined()) output.collect(prefix + ".output", out);
}

}  // namespace s5vh::ssm
