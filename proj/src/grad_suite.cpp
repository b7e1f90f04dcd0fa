#include <cmath>

#include "s5vh/gradcheck.hpp"
#include "s5vh/losses.hpp"
#include "s5vh/model.hpp"
#include "s5vh/ops.hpp"
#include "s5vh/rng.hpp"
#include "s5vh/ssm.hpp"

namespace s5vh {

namespace {

class Inputs {
public:
    explicit Inputs(std::uint64_t seed) : rng_(RngStreams(seed).stream("gradcheck")) {}

    Tensor normal_leaf(Shape shape, double scale = 1.0) {
        std::vector<double> v(numel(shape));
        for (auto& x : v) x = scale * normal(rng_);
        return Tensor::from(std::move(shape), std::move(v), DType::F64, true);
    }
    Tensor uniform_leaf(Shape shape, double lo, double hi) {
        std::vector<double> v(numel(shape));
        for (auto& x : v) x = uniform(rng_, lo, hi);
        return Tensor::from(std::move(shape), std::move(v), DType::F64, true);
    }
    std::mt19937_64& rng() { return rng_; }

private:
    std::mt19937_64 rng_;
};

// weighted sum so that every output entry receives a distinct upstream gradient
Tensor probe(const Tensor& y) {
    std::vector<double> w(y.numel());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(0.7 * static_cast<double>(i) + 0.3);
    return ops::sum_all(ops::mul(y, Tensor::from(y.shape(), std::move(w), DType::F64)));
}

GradCase unary(const std::string& name, Tensor (*op)(const Tensor&), Tensor x) {
    return {name, [op](const std::vector<Tensor>& in) { return probe(op(in[0])); }, {x}};
}

}  // namespace

std::vector<GradCase> gradient_suite(std::uint64_t seed) {
    Inputs g(seed);
    std::vector<GradCase> cases;
    using V = const std::vector<Tensor>&;

    cases.push_back({"add", [](V in) { return probe(ops::add(in[0], in[1])); }, {g.normal_leaf({2, 3, 4}), g.normal_leaf({3, 4})}});
    cases.push_back({"sub", [](V in) { return probe(ops::sub(in[1], in[0])); }, {g.normal_leaf({2, 3, 4}), g.normal_leaf({4})}});
    cases.push_back({"mul", [](V in) { return probe(ops::mul(in[0], in[1])); }, {g.normal_leaf({2, 3, 4}), g.normal_leaf({3, 4})}});
    cases.push_back({"scale", [](V in) { return probe(ops::scale(in[0], -1.7)); }, {g.normal_leaf({3, 4})}});
    cases.push_back({"add_scalar", [](V in) { return probe(ops::add_scalar(in[0], 0.4)); }, {g.normal_leaf({5})}});
    cases.push_back({"matmul", [](V in) { return probe(ops::matmul(in[0], in[1])); }, {g.normal_leaf({2, 3, 4}), g.normal_leaf({4, 5})}});
    cases.push_back({"transpose", [](V in) { return probe(ops::transpose(in[0])); }, {g.normal_leaf({3, 5})}});
    cases.push_back(unary("tanh", ops::tanh, g.normal_leaf({3, 4})));
    cases.push_back(unary("silu", ops::silu, g.normal_leaf({3, 4})));
    cases.push_back(unary("softplus", ops::softplus, g.normal_leaf({3, 4})));
    cases.push_back(unary("exp", ops::exp, g.normal_leaf({3, 4})));
    cases.push_back(unary("log", ops::log, g.uniform_leaf({3, 4}, 0.5, 2.0)));
    cases.push_back(unary("square", ops::square, g.normal_leaf({3, 4})));
    cases.push_back({"layer_norm", [](V in) { return probe(ops::layer_norm(in[0], in[1], in[2])); },
                     {g.normal_leaf({2, 3, 6}), g.normal_leaf({6}), g.normal_leaf({6})}});
    cases.push_back({"depthwise_conv1d", [](V in) { return probe(ops::depthwise_conv1d(in[0], in[1], in[2])); },
                     {g.normal_leaf({2, 7, 3}), g.normal_leaf({3, 4}), g.normal_leaf({3})}});
    cases.push_back({"sum", [](V in) { return probe(ops::sum(in[0], 1)); }, {g.normal_leaf({2, 3, 4})}});
    cases.push_back({"mean", [](V in) { return probe(ops::mean(in[0], 0)); }, {g.normal_leaf({2, 3, 4})}});
    cases.push_back({"sum_all", [](V in) { return ops::sum_all(ops::square(in[0])); }, {g.normal_leaf({2, 3})}});
    cases.push_back({"mean_all", [](V in) { return ops::mean_all(ops::square(in[0])); }, {g.normal_leaf({2, 3})}});
    cases.push_back({"log_sum_exp", [](V in) { return probe(ops::log_sum_exp(in[0], 1)); }, {g.normal_leaf({3, 5})}});
    cases.push_back({"slice", [](V in) { return probe(ops::slice(in[0], 1, 1, 2)); }, {g.normal_leaf({2, 4, 3})}});
    cases.push_back({"concat", [](V in) { return probe(ops::concat({in[0], in[1]}, 1)); },
                     {g.normal_leaf({2, 3, 2}), g.normal_leaf({2, 1, 2})}});
    cases.push_back({"reverse", [](V in) { return probe(ops::reverse(in[0], 1)); }, {g.normal_leaf({2, 4, 3})}});
    cases.push_back({"gather_rows", [](V in) { return probe(ops::gather_rows(in[0], {{0, 2}, {3, 1}})); },
                     {g.normal_leaf({2, 4, 3})}});
    cases.push_back({"scatter_rows", [](V in) { return probe(ops::scatter_rows(in[0], {{0, 2}, {3, 1}}, 5)); },
                     {g.normal_leaf({2, 2, 3})}});
    cases.push_back({"diagonal", [](V in) { return probe(ops::diagonal(in[0])); }, {g.normal_leaf({4, 4})}});
    cases.push_back({"pick", [](V in) { return probe(ops::pick(in[0], {2, 0, 1})); }, {g.normal_leaf({3, 4})}});
    cases.push_back({"selective_scan",
                     [](V in) {
                         Tensor delta = ops::softplus(in[1]);
                         Tensor a = ops::scale(ops::exp(in[2]), -1.0);
                         return probe(ssm::selective_scan(in[0], delta, a, in[3], in[4]));
                     },
                     {g.normal_leaf({2, 6, 3}), g.normal_leaf({2, 6, 3}), g.normal_leaf({3, 4}, 0.5),
                      g.normal_leaf({2, 6, 4}), g.normal_leaf({2, 6, 4})}});

    cases.push_back({"loss_temporal_reconstruction",
                     [](V in) { return losses::temporal_reconstruction_loss(in[0], in[1], {{0, 3}, {1, 2}}); },
                     {g.normal_leaf({2, 4, 3}), g.normal_leaf({2, 4, 3})}});
    cases.push_back({"loss_contrastive", [](V in) { return losses::contrastive_loss(in[0], in[1], 0.5); },
                     {g.uniform_leaf({4, 6}, -1.0, 1.0), g.uniform_leaf({4, 6}, -1.0, 1.0)}});
    cases.push_back({"loss_center_alignment",
                     [](V in) { return losses::center_alignment_loss(in[0], {1, 0, 2, 1}, in[1], 0.5); },
                     {g.uniform_leaf({4, 6}, -1.0, 1.0), g.uniform_leaf({3, 6}, -1.0, 1.0)}});

    ssm::MambaConfig mc;
    mc.state_size = 3;
    mc.conv_width = 3;
    mc.expand = 2;
    for (auto dir : {ssm::Direction::Forward, ssm::Direction::Backward}) {
        ssm::MambaBlock block(4, mc, dir, DType::F64, g.rng());
        nn::ParameterList params;
        block.collect("block", params);
        GradCase c{dir == ssm::Direction::Forward ? "mamba_block_forward" : "mamba_block_backward", {}, {}};
        c.inputs.push_back(g.normal_leaf({2, 5, 4}));
        for (auto& [name, p] : params) c.inputs.push_back(p);
        c.f = [block](V in) { return probe(block.forward(in[0])); };
        cases.push_back(std::move(c));
    }

    ModelConfig config;
    config.feature_dim = 5;
    config.code_bits = 4;
    config.encoder_dim = 6;
    config.decoder_dim = 6;
    config.encoder_layers = 1;
    config.decoder_layers = 1;
    config.mamba = mc;
    auto model = std::make_shared<S5vhModel>(config, DType::F64, seed);
    Tensor frames = g.normal_leaf({2, 6, 5});
    Tensor centers = Tensor::from({3, 4}, {1, 1, -1, -1, -1, 1, 1, -1, 1, -1, -1, 1}, DType::F64);
    GradCase full{"model_two_videos", {}, {frames}};
    for (auto& [name, p] : model->parameters()) full.inputs.push_back(p);
    full.f = [model, centers](V in) {
        const std::vector<std::vector<std::size_t>> visible{{0, 2, 3}, {1, 4, 5}, {1, 2, 5}, {0, 3, 4}};
        const std::vector<std::vector<std::size_t>> masked{{1, 4, 5}, {0, 2, 3}, {0, 3, 4}, {1, 2, 5}};
        Tensor both = ops::concat({in[0], in[0]}, 0);
        Tensor h = model->frame_hash(ops::gather_rows(both, visible));
        Tensor recon = model->reconstruct(h, visible, 6);
        Tensor pooled = ops::mean(h, 1);
        Tensor a = ops::slice(pooled, 0, 0, 2), b = ops::slice(pooled, 0, 2, 2);
        losses::LossParts parts;
        parts.reconstruction_a = losses::temporal_reconstruction_loss(ops::slice(recon, 0, 0, 2), in[0],
                                                                      {masked[0], masked[1]});
        parts.reconstruction_b = losses::temporal_reconstruction_loss(ops::slice(recon, 0, 2, 2), in[0],
                                                                      {masked[2], masked[3]});
        parts.contrastive = losses::contrastive_loss(a, b, 0.5);
        parts.alignment_a = losses::center_alignment_loss(a, {0, 2}, centers, 0.5);
        parts.alignment_b = losses::center_alignment_loss(b, {0, 2}, centers, 0.5);
        return losses::total_loss(parts, {});
    };
    cases.push_back(std::move(full));
    return cases;
}

}  // namespace s5vh
