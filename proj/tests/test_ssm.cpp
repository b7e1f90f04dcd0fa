#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "s5vh/model.hpp"
#include "s5vh/ops.hpp"
#include "s5vh/rng.hpp"
#include "s5vh/ssm.hpp"

using namespace s5vh;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo, double hi, DType dtype = DType::F64) {
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = uniform(rng, lo, hi);
    return Tensor::from(std::move(shape), std::move(v), dtype);
}

void zero(Tensor& t) {
    for (auto& v : t.mutable_data()) v = 0.0;
}

}  // namespace

TEST_CASE("ZOH discretization") {
    auto z = ssm::discretize(-1.0, 1.0, std::log(2.0));
    CHECK(z.decay == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(z.input == doctest::Approx(0.5).epsilon(1e-15));

    auto small = ssm::discretize(-1.0, 1.0, 1e-12);
    CHECK(small.decay == doctest::Approx(1.0));
    CHECK(std::abs(small.input) < 1e-11);

    // a -> 0 takes the series branch and tends to delta * b
    auto flat = ssm::discretize(-1e-9, 1.0, 0.1);
    CHECK(flat.input == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(std::isfinite(ssm::discretize(0.0, 1.0, 0.1).input));
    CHECK(ssm::discretize(0.0, 1.0, 0.1).input == 0.1);

    // continuity across the series threshold
    const double a = -1.0;
    const double below = ssm::discretize(a, 1.0, 0.99999e-4).input / 0.99999e-4;
    const double above = ssm::discretize(a, 1.0, 1.00001e-4).input / 1.00001e-4;
    CHECK(std::abs(below - above) < 1e-8);

    for (double delta : {1e-3, 0.05, 0.5, 3.0}) {
        auto d = ssm::discretize(-2.0, 1.0, delta);
        CHECK(d.decay > 0.0);
        CHECK(d.decay < 1.0);
    }
}

TEST_CASE("scan reproduces the hand-unrolled recurrence") {
    const double ln2 = std::log(2.0);
    Tensor u = Tensor::from({1, 3, 1}, {1, 0, 0}, DType::F64);
    Tensor delta = Tensor::full({1, 3, 1}, ln2, DType::F64);
    Tensor a = Tensor::from({1, 1}, {-1.0}, DType::F64);
    Tensor b = Tensor::full({1, 3, 1}, 1.0, DType::F64);
    Tensor c = Tensor::full({1, 3, 1}, 1.0, DType::F64);
    auto y = values(ssm::selective_scan(u, delta, a, b, c));
    CHECK(y[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(y[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(y[2] == doctest::Approx(0.125).epsilon(1e-15));
}

TEST_CASE("length-one scan is C b_bar x") {
    Tensor u = Tensor::from({1, 1, 1}, {2.0}, DType::F64);
    Tensor delta = Tensor::from({1, 1, 1}, {0.3}, DType::F64);
    Tensor a = Tensor::from({1, 2}, {-1.0, -2.0}, DType::F64);
    Tensor b = Tensor::from({1, 1, 2}, {0.5, -1.0}, DType::F64);
    Tensor c = Tensor::from({1, 1, 2}, {1.5, 0.25}, DType::F64);
    double want = 1.5 * ssm::discretize(-1.0, 0.5, 0.3).input * 2.0 + 0.25 * ssm::discretize(-2.0, -1.0, 0.3).input * 2.0;
    CHECK(ssm::selective_scan(u, delta, a, b, c).item() == doctest::Approx(want).epsilon(1e-15));
}

TEST_CASE("scan matches the naive oracle at length 256") {
    auto rng = RngStreams(11).stream("test");
    const std::size_t nb = 2, nt = 256, ne = 3, ns = 4;
    for (DType dtype : {DType::F64, DType::F32}) {
        Tensor u = random_tensor({nb, nt, ne}, rng, -1, 1, dtype);
        Tensor delta = random_tensor({nb, nt, ne}, rng, 1e-3, 0.5, dtype);
        Tensor a = random_tensor({ne, ns}, rng, -4, -0.1, dtype);
        Tensor b = random_tensor({nb, nt, ns}, rng, -1, 1, dtype);
        Tensor c = random_tensor({nb, nt, ns}, rng, -1, 1, dtype);
        auto want = oracle::scan(values(u), values(delta), values(a), values(b), values(c), nb, nt, ne, ns);
        double err = oracle::normwise_rel_error(values(ssm::selective_scan(u, delta, a, b, c)), want);
        CHECK(err <= (dtype == DType::F64 ? 1e-10 : 1e-6));
    }
}

TEST_CASE("scan rejects bad shapes and empty sequences") {
    Tensor u = Tensor::zeros({1, 0, 2}, DType::F64);
    Tensor a = Tensor::full({2, 3}, -1.0, DType::F64);
    Tensor bc = Tensor::zeros({1, 0, 3}, DType::F64);
    CHECK_THROWS_AS(ssm::selective_scan(u, u, a, bc, bc), ShapeError);
    Tensor u1 = Tensor::zeros({1, 4, 2}, DType::F64);
    Tensor b1 = Tensor::zeros({1, 4, 3}, DType::F64);
    CHECK_THROWS_AS(ssm::selective_scan(u1, u1, Tensor::zeros({3, 3}, DType::F64), b1, b1), ShapeError);
    CHECK_THROWS_AS(ssm::selective_scan(u1, u1, a, Tensor::zeros({1, 4, 2}, DType::F64), b1), ShapeError);
}

TEST_CASE("hidden states stay bounded over many random scans") {
    auto rng = RngStreams(12).stream("test");
    bool finite = true;
    double worst = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        Tensor u = random_tensor({1, 16, 2}, rng, -1, 1);
        Tensor delta = random_tensor({1, 16, 2}, rng, 1e-4, 2.0);
        Tensor a = random_tensor({2, 3}, rng, -8, -1e-3);
        Tensor b = random_tensor({1, 16, 3}, rng, -1, 1);
        Tensor c = random_tensor({1, 16, 3}, rng, -1, 1);
        Tensor y = ssm::selective_scan(u, delta, a, b, c);
        for (double v : y.data()) {
            finite = finite && std::isfinite(v);
            worst = std::max(worst, std::abs(v));
        }
    }
    CHECK(finite);
    // |h| <= sum_t |b_bar| <= 16 * delta_max per state, 3 states, |c| <= 1
    CHECK(worst <= 3 * 16 * 2.0);
}

namespace {

ssm::MambaConfig small_config() {
    ssm::MambaConfig c;
    c.state_size = 4;
    c.conv_width = 3;
    return c;
}

}  // namespace

TEST_CASE("backward block is reverse(scan(reverse(x)))") {
    auto rng = RngStreams(13).stream("test");
    ssm::MambaBlock block(4, small_config(), ssm::Direction::Backward, DType::F64, rng);
    Tensor x = random_tensor({2, 7, 4}, rng, -1, 1);
    CHECK(values(block.forward(x)) == values(ops::reverse(block.forward_scan(ops::reverse(x, 1)), 1)));

    ssm::MambaBlock fwd = block;
    fwd.direction = ssm::Direction::Forward;
    CHECK(values(fwd.forward(x)) == values(block.forward_scan(x)));
}

TEST_CASE("mamba block with zero input and zero biases is zero") {
    auto rng = RngStreams(14).stream("test");
    ssm::MambaBlock block(4, small_config(), ssm::Direction::Forward, DType::F64, rng);
    zero(block.dt_proj.bias);  // the only bias that is not zero at initialization
    Tensor y = block.forward(Tensor::zeros({1, 5, 4}, DType::F64));
    for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("bidirectional layer") {
    auto rng = RngStreams(15).stream("test");
    Tensor x = random_tensor({2, 6, 4}, rng, -1, 1);

    SUBCASE("sum of the two blocks plus residual") {
        ssm::BidirectionalLayer layer(4, small_config(), true, DType::F64, rng);
        Tensor want = ops::add(ops::add(layer.forward_block.forward(x), layer.backward_block.forward(x)), x);
        CHECK(values(layer.forward(x)) == values(want));
        layer.residual = false;
        CHECK(values(layer.forward(x)) ==
              values(ops::add(layer.forward_block.forward(x), layer.backward_block.forward(x))));
    }
    SUBCASE("zero output projections leave only the residual path") {
        ssm::BidirectionalLayer layer(4, small_config(), true, DType::F64, rng);
        for (auto* block : {&layer.forward_block, &layer.backward_block}) {
            zero(block->out_proj.weight);
            zero(block->out_proj.bias);
        }
        CHECK(values(layer.forward(x)) == values(x));
    }
    SUBCASE("swapping parameters and reversing the input reverses the output") {
        for (bool residual : {false, true}) {
            ssm::BidirectionalLayer layer(4, small_config(), residual, DType::F64, rng);
            ssm::BidirectionalLayer swapped = layer;
            std::swap(swapped.forward_block, swapped.backward_block);
            swapped.forward_block.direction = ssm::Direction::Forward;
            swapped.backward_block.direction = ssm::Direction::Backward;
            CHECK(values(swapped.forward(ops::reverse(x, 1))) == values(ops::reverse(layer.forward(x), 1)));
        }
    }
}

TEST_CASE("mamba block initialization") {
    auto rng = RngStreams(16).stream("test");
    ssm::MambaConfig config;
    ssm::MambaBlock block(32, config, ssm::Direction::Forward, DType::F64, rng);
    CHECK(block.d_inner == 64);
    CHECK(block.dt_rank == 2);
    CHECK(block.state_size == 16);
    for (std::size_t e = 0; e < block.d_inner; ++e)
        for (std::size_t n = 0; n < 16; ++n) CHECK(-std::exp(block.a_log.data()[e * 16 + n]) == doctest::Approx(-double(n + 1)));
    for (double bias : block.dt_proj.bias.data()) {
        const double dt = std::log1p(std::exp(bias));
        CHECK(dt >= 1e-3 * (1 - 1e-9));
        CHECK(dt <= 1e-1 * (1 + 1e-9));
    }
}

TEST_CASE("encoder and decoder shapes, T = 1 included") {
    ModelConfig config;
    config.feature_dim = 6;
    config.code_bits = 5;
    config.encoder_dim = 8;
    config.decoder_dim = 4;
    config.encoder_layers = 2;
    config.mamba = small_config();
    S5vhModel model(config, DType::F64, 1);
    auto rng = RngStreams(17).stream("test");
    for (std::size_t t : {1, 9}) {
        Tensor frames = random_tensor({2, t, 6}, rng, -1, 1);
        Tensor h = model.frame_hash(frames);
        CHECK(h.shape() == Shape{2, t, 5});
        std::vector<std::vector<std::size_t>> visible(2);
        for (std::size_t i = 0; i < t; ++i) visible[0].push_back(i), visible[1].push_back(i);
        Tensor recon = model.reconstruct(h, visible, t + 2);
        CHECK(recon.shape() == Shape{2, t + 2, 6});
        for (double v : recon.data()) CHECK(std::isfinite(v));
    }
    CHECK_THROWS_AS(model.frame_hash(Tensor::zeros({1, 3, 7}, DType::F64)), ShapeError);
    CHECK(model.encode(Tensor::zeros({1, 6}, DType::F64)).size() == 5);
}
