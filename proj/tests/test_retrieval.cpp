#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "s5vh/retrieval.hpp"
#include "s5vh/rng.hpp"

using namespace s5vh;

namespace {

std::vector<int> random_code(std::size_t bits, std::mt19937_64& rng) {
    std::vector<int> c(bits);
    for (auto& v : c) v = uniform01(rng) < 0.5 ? -1 : 1;
    return c;
}

hashing::PackedCodes pack(const std::vector<std::vector<int>>& codes, std::size_t bits) {
    hashing::PackedCodes p(bits);
    for (const auto& c : codes) p.push_back(hashing::HashCode(c.begin(), c.end()));
    return p;
}

}  // namespace

TEST_CASE("hamming distance") {
    hashing::HashCode a(16, 1), b(16, -1);
    CHECK(retrieval::hamming_distance(a, a) == 0);
    CHECK(retrieval::hamming_distance(a, b) == 16);
    CHECK_THROWS_AS(retrieval::hamming_distance(a, hashing::HashCode(8, 1)), ShapeError);

    auto rng = RngStreams(1).stream("test");
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t bits = 1 + uniform_index(rng, 70);
        auto x = random_code(bits, rng), y = random_code(bits, rng), z = random_code(bits, rng);
        auto p = pack({x, y, z}, bits);
        const auto dxy = retrieval::hamming_distance_packed(p.row(0), p.row(1));
        CHECK(dxy == static_cast<std::size_t>(oracle::hamming(x, y)));
        CHECK(dxy == retrieval::hamming_distance(p.unpack(0), p.unpack(1)));
        CHECK(dxy == retrieval::hamming_distance_packed(p.row(1), p.row(0)));
        CHECK(retrieval::hamming_distance_packed(p.row(0), p.row(0)) == 0);
        CHECK(dxy <= retrieval::hamming_distance_packed(p.row(0), p.row(2)) +
                         retrieval::hamming_distance_packed(p.row(2), p.row(1)));
    }
}

TEST_CASE("ranking: self first, ties in index order, oracle") {
    auto rng = RngStreams(2).stream("test");
    std::vector<std::vector<int>> db;
    for (int i = 0; i < 30; ++i) db.push_back(random_code(12, rng));
    auto p = pack(db, 12);
    auto order = retrieval::rank(p.row(17), p);
    CHECK(order.front() == 17);

    std::vector<std::vector<int>> same(5, std::vector<int>(12, 1));
    auto flat = retrieval::rank(pack({std::vector<int>(12, -1)}, 12).row(0), pack(same, 12));
    CHECK(flat == std::vector<std::size_t>{0, 1, 2, 3, 4});

    for (int trial = 0; trial < 20; ++trial) {
        auto q = random_code(12, rng);
        CHECK(retrieval::rank(pack({q}, 12).row(0), p) == oracle::rank(q, db));
    }
    CHECK_THROWS_AS(retrieval::rank(pack({random_code(8, rng)}, 8).row(0), p), ShapeError);
}

TEST_CASE("AP@N examples") {
    const std::vector<std::uint8_t> r{1, 0, 1};
    CHECK(retrieval::ap_at_n(r, 3) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK(retrieval::ap_at_n(std::vector<std::uint8_t>{0, 0, 0, 0}, 4) == 0.0);
    CHECK(retrieval::ap_at_n(std::vector<std::uint8_t>{1, 1, 1, 1, 1}, 3) == 1.0);
    CHECK(retrieval::ap_at_n(std::vector<std::uint8_t>{1, 1, 1, 1, 1}, 5) == 1.0);
    // N beyond the list uses the whole list
    CHECK(retrieval::ap_at_n(r, 100) == doctest::Approx(5.0 / 6.0));
}

TEST_CASE("GmAP is the root sum of squares") {
    std::vector<double> same(6, 0.3);
    CHECK(retrieval::gmap(same) == doctest::Approx(0.3 * std::sqrt(6.0)).epsilon(1e-15));
    CHECK(retrieval::gmap(std::vector<double>(6, 0.0)) == 0.0);
    CHECK(retrieval::gmap(std::vector<double>{0, 0, 0, 0.1, 0, 0}) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK_THROWS_AS(retrieval::gmap(std::vector<double>{0.1, 0.2}), Error);
}

TEST_CASE("mAP and PR match naive oracles") {
    auto rng = RngStreams(3).stream("test");
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t bits = 4 + uniform_index(rng, 12);
        std::vector<std::vector<int>> q, db;
        std::vector<int> ql, dl;
        for (int i = 0; i < 8; ++i) q.push_back(random_code(bits, rng)), ql.push_back(static_cast<int>(uniform_index(rng, 4)));
        for (int i = 0; i < 60; ++i) db.push_back(random_code(bits, rng)), dl.push_back(static_cast<int>(uniform_index(rng, 4)));
        auto qp = pack(q, bits), dp = pack(db, bits);
        auto maps = retrieval::map_at_cutoffs(qp, ql, dp, dl, retrieval::kStandardCutoffs);
        for (std::size_t i = 0; i < maps.size(); ++i) {
            const double want = oracle::map_at(q, ql, db, dl, retrieval::kStandardCutoffs[i]);
            CHECK(std::abs(maps[i] - want) <= 1e-12);
            CHECK(std::abs(retrieval::map_at_n(qp, ql, dp, dl, retrieval::kStandardCutoffs[i]) - want) <= 1e-12);
        }
        auto pr = retrieval::pr_curve(qp, ql, dp, dl);
        auto want = oracle::pr(q, ql, db, dl, static_cast<int>(bits));
        REQUIRE(pr.size() == bits + 1);
        for (std::size_t r = 0; r <= bits; ++r) {
            CHECK(pr[r].radius == r);
            CHECK(std::abs(pr[r].precision - want[r].precision) <= 1e-12);
            CHECK(std::abs(pr[r].recall - want[r].recall) <= 1e-12);
        }
        CHECK(pr.back().recall == doctest::Approx(1.0));
    }
}

TEST_CASE("PR at radius 0 without duplicates has zero recall") {
    std::vector<std::vector<int>> q{{1, 1, 1, 1}}, db{{-1, 1, 1, 1}, {1, -1, 1, 1}};
    auto pr = retrieval::pr_curve(pack(q, 4), std::vector<int>{0}, pack(db, 4), std::vector<int>{0, 1});
    CHECK(pr[0].recall == 0.0);
    CHECK(pr[0].precision == 0.0);
    CHECK(pr[4].recall == 1.0);
}

TEST_CASE("mAP is invariant to database permutation without ties") {
    // distinct distances 0..7 from the all-ones query
    std::vector<std::vector<int>> db;
    std::vector<int> dl;
    for (int d = 0; d < 8; ++d) {
        std::vector<int> c(8, 1);
        for (int i = 0; i < d; ++i) c[static_cast<std::size_t>(i)] = -1;
        db.push_back(c);
        dl.push_back(d % 3 == 0);
    }
    std::vector<std::vector<int>> q{std::vector<int>(8, 1)};
    const std::vector<int> ql{1};
    const double base = retrieval::map_at_n(pack(q, 8), ql, pack(db, 8), dl, 5);
    std::vector<std::size_t> perm{5, 2, 7, 0, 3, 1, 6, 4};
    std::vector<std::vector<int>> pdb;
    std::vector<int> pdl;
    for (auto p : perm) pdb.push_back(db[p]), pdl.push_back(dl[p]);
    CHECK(retrieval::map_at_n(pack(q, 8), ql, pack(pdb, 8), pdl, 5) == base);
}
