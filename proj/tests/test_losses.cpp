#include <cmath>

#include "doctest.h"
#include "s5vh/losses.hpp"
#include "s5vh/ops.hpp"
#include "s5vh/rng.hpp"

using namespace s5vh;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo, double hi) {
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = uniform(rng, lo, hi);
    return Tensor::from(std::move(shape), std::move(v), DType::F64);
}

Tensor random_codes(std::size_t n, std::size_t k, std::mt19937_64& rng) {
    std::vector<double> v(n * k);
    for (auto& x : v) x = uniform01(rng) < 0.5 ? -1.0 : 1.0;
    return Tensor::from({n, k}, std::move(v), DType::F64);
}

double dot(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
    const std::size_t k = a.dim(1);
    double s = 0.0;
    for (std::size_t d = 0; d < k; ++d) s += a.data()[i * k + d] * b.data()[j * k + d];
    return s;
}

// materializes the full similarity matrix
double naive_contrastive(const Tensor& a, const Tensor& b, double tau) {
    const std::size_t n = a.dim(0);
    const double k = static_cast<double>(a.dim(1));
    std::vector<std::vector<double>> s(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) s[i][j] = std::exp(dot(a, i, b, j) / k / tau);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0, col = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row += s[i][j];
            col += s[j][i];
        }
        total += -std::log(s[i][i] / row) - std::log(s[i][i] / col);
    }
    return total / static_cast<double>(n);
}

double naive_alignment(const Tensor& codes, const std::vector<std::size_t>& labels, const Tensor& centers, double tau) {
    const double k = static_cast<double>(codes.dim(1));
    double total = 0.0;
    for (std::size_t i = 0; i < codes.dim(0); ++i) {
        double denom = 0.0;
        for (std::size_t c = 0; c < centers.dim(0); ++c) denom += std::exp(dot(centers, c, codes, i) / k / tau);
        total += -std::log(std::exp(dot(centers, labels[i], codes, i) / k / tau) / denom);
    }
    return total / static_cast<double>(codes.dim(0));
}

}  // namespace

TEST_CASE("temporal reconstruction loss") {
    auto rng = RngStreams(1).stream("test");
    Tensor f = random_tensor({2, 5, 3}, rng, -1, 1);
    CHECK(losses::temporal_reconstruction_loss(f, f, {{0, 2}, {4, 1}}).item() == 0.0);

    // a single masked frame offset by the all-ones vector costs D
    std::vector<double> shifted(f.data().begin(), f.data().end());
    for (std::size_t d = 0; d < 3; ++d) shifted[2 * 3 + d] += 1.0;
    Tensor g = Tensor::from({1, 5, 3}, std::vector<double>(shifted.begin(), shifted.begin() + 15), DType::F64);
    Tensor f0 = ops::slice(f, 0, 0, 1);
    CHECK(losses::temporal_reconstruction_loss(g, f0, {{2}}).item() == doctest::Approx(3.0).epsilon(1e-14));

    Tensor r = random_tensor({2, 5, 3}, rng, -1, 1);
    const std::vector<std::vector<std::size_t>> masked{{0, 2, 3}, {4, 1, 0}};
    double want = 0.0;
    for (std::size_t b = 0; b < 2; ++b) {
        double per = 0.0;
        for (auto m : masked[b])
            for (std::size_t d = 0; d < 3; ++d) {
                double e = r.at({b, m, d}) - f.at({b, m, d});
                per += e * e;
            }
        want += per / 3.0;
    }
    want /= 2.0;
    CHECK(losses::temporal_reconstruction_loss(r, f, masked).item() == doctest::Approx(want).epsilon(1e-12));
    CHECK_THROWS_AS(losses::temporal_reconstruction_loss(r, f, {{}, {}}), Error);
}

TEST_CASE("contrastive loss") {
    Tensor one = Tensor::from({1, 4}, {1, -1, 1, 1}, DType::F64);
    Tensor other = Tensor::from({1, 4}, {-1, -1, 1, -1}, DType::F64);
    CHECK(losses::contrastive_loss(one, other, 0.5).item() == 0.0);

    Tensor pair = Tensor::from({2, 2}, {1, 1, 1, -1}, DType::F64);
    const double want = 2.0 * std::log(1.0 + std::exp(-2.0));
    CHECK(want == doctest::Approx(0.2538).epsilon(1e-3));
    CHECK(losses::contrastive_loss(pair, pair, 0.5).item() == doctest::Approx(want).epsilon(1e-14));

    auto rng = RngStreams(2).stream("test");
    for (int trial = 0; trial < 20; ++trial) {
        Tensor a = random_codes(6, 8, rng), b = random_codes(6, 8, rng);
        double tau = uniform(rng, 0.1, 2.0);
        CHECK(losses::contrastive_loss(a, b, tau).item() == doctest::Approx(naive_contrastive(a, b, tau)).epsilon(1e-6));
    }
}

TEST_CASE("contrastive loss falls as tau falls on orthogonal identical views") {
    Tensor codes = Tensor::from({4, 4}, {1, 1, 1, 1, 1, -1, 1, -1, 1, 1, -1, -1, 1, -1, -1, 1}, DType::F64);
    double previous = INFINITY;
    for (double tau : {2.0, 1.0, 0.5, 0.25, 0.1}) {
        double v = losses::contrastive_loss(codes, codes, tau).item();
        CHECK(v < previous);
        previous = v;
    }
}

TEST_CASE("center alignment loss") {
    Tensor centers = Tensor::from({2, 2}, {1, 1, 1, -1}, DType::F64);
    Tensor b = Tensor::from({1, 2}, {1, 1}, DType::F64);
    const double want = -std::log(std::exp(2.0) / (std::exp(2.0) + 1.0));
    CHECK(want == doctest::Approx(0.1269).epsilon(1e-3));
    CHECK(losses::center_alignment_loss(b, {0}, centers, 0.5).item() == doctest::Approx(want).epsilon(1e-14));

    Tensor single = Tensor::from({1, 2}, {1, -1}, DType::F64);
    CHECK(losses::center_alignment_loss(b, {0}, single, 0.5).item() == 0.0);
    CHECK_THROWS_AS(losses::center_alignment_loss(b, {2}, centers, 0.5), Error);

    auto rng = RngStreams(3).stream("test");
    for (int trial = 0; trial < 20; ++trial) {
        Tensor codes = random_codes(5, 8, rng), phi = random_codes(4, 8, rng);
        std::vector<std::size_t> labels;
        for (int i = 0; i < 5; ++i) labels.push_back(uniform_index(rng, 4));
        CHECK(losses::center_alignment_loss(codes, labels, phi, 0.5).item() ==
              doctest::Approx(naive_alignment(codes, labels, phi, 0.5)).epsilon(1e-6));
    }
}

TEST_CASE("losses are invariant to permuting the batch") {
    auto rng = RngStreams(4).stream("test");
    Tensor a = random_codes(5, 8, rng), b = random_codes(5, 8, rng), phi = random_codes(3, 8, rng);
    std::vector<std::size_t> labels{0, 2, 1, 1, 0};
    const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    auto permute = [&](const Tensor& t) {
        std::vector<double> v;
        for (auto p : perm)
            for (std::size_t d = 0; d < 8; ++d) v.push_back(t.data()[p * 8 + d]);
        return Tensor::from({5, 8}, v, DType::F64);
    };
    std::vector<std::size_t> plabels;
    for (auto p : perm) plabels.push_back(labels[p]);
    CHECK(losses::contrastive_loss(permute(a), permute(b), 0.5).item() ==
          doctest::Approx(losses::contrastive_loss(a, b, 0.5).item()).epsilon(1e-14));
    CHECK(losses::center_alignment_loss(permute(a), plabels, phi, 0.5).item() ==
          doctest::Approx(losses::center_alignment_loss(a, labels, phi, 0.5).item()).epsilon(1e-14));
}

TEST_CASE("total loss arithmetic and gradient") {
    auto s = [](double v) { return Tensor::scalar(v, DType::F64); };
    losses::LossParts parts{s(2), s(2), s(3), s(4), s(4)};
    CHECK(losses::total_loss(parts, {}).item() == 9.0);
    losses::LossParts zero{s(0), s(0), s(0), s(0), s(0)};
    CHECK(losses::total_loss(zero, {}).item() == 0.0);
    losses::LossParts no_alignment{s(2), s(2), s(3), {}, {}};
    CHECK(losses::total_loss(no_alignment, {}).item() == 5.0);
    losses::LossWeights w{0.5, 3.0, 0.5};
    CHECK(losses::total_loss(parts, w).item() == doctest::Approx(2 + 1.5 + 12));

    std::vector<Tensor> leaves;
    for (double v : {1.0, 2.0, 3.0, 4.0, 5.0}) leaves.push_back(Tensor::from({}, {v}, DType::F64, true));
    Tape tape;
    {
        TapeScope scope(tape);
        tape.backward(losses::total_loss({leaves[0], leaves[1], leaves[2], leaves[3], leaves[4]}, w));
    }
    const double want[5] = {0.5, 0.5, 0.5, 1.5, 1.5};
    for (int i = 0; i < 5; ++i) CHECK(leaves[static_cast<std::size_t>(i)].grad()[0] == doctest::Approx(want[i]));

    losses::LossParts bad{s(NAN), s(0), s(0), s(0), s(0)};
    CHECK_THROWS_AS(losses::total_loss(bad, {}), Error);
    CHECK_THROWS_AS(losses::LossWeights({0.0, 1.0, 0.5}).validate(), Error);
}
