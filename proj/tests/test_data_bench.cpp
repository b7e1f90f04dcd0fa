#include <Eigen/Dense>
#include <cmath>
#include <fstream>

#include "doctest.h"
#include "s5vh/bench.hpp"
#include "s5vh/data.hpp"
#include "s5vh/io.hpp"
#include "s5vh/rng.hpp"
#include "scratch.hpp"

using namespace s5vh;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

bench::Workload identity_workload(std::size_t dim) {
    return {"identity", dim, [](const Tensor&) {}};
}

}  // namespace

TEST_CASE("manifest validation") {
    auto dir = scratch_dir("manifest");
    io::write_tensor(dir / "a.s5vt", Tensor::zeros({3, 2}));
    io::write_tensor(dir / "b.s5vt", Tensor::zeros({3, 2}));

    write_text(dir / "ok.json",
               R"({"split":"train","videos":[{"id":"a","path":"a.s5vt","n_frames":3,"dim":2},)"
               R"({"id":"b","path":"b.s5vt","n_frames":3,"dim":2,"label":4}]})");
    auto m = data::ingest_manifest(dir / "ok.json");
    REQUIRE(m.videos.size() == 2);
    CHECK(m.split == "train");
    CHECK(!m.videos[0].label);
    CHECK(m.videos[1].label == 4);
    auto d = data::load_dataset(m);
    CHECK(d.labels == std::vector<int>{-1, 4});

    write_text(dir / "missing_key.json", R"({"videos":[{"id":"a","path":"a.s5vt","n_frames":3}]})");
    CHECK_THROWS_WITH_AS(data::ingest_manifest(dir / "missing_key.json"), doctest::Contains("dim"), io::FormatError);

    write_text(dir / "dup.json",
               R"({"videos":[{"id":"a","path":"a.s5vt","n_frames":3,"dim":2},)"
               R"({"id":"a","path":"b.s5vt","n_frames":3,"dim":2}]})");
    CHECK_THROWS_WITH_AS(data::ingest_manifest(dir / "dup.json"), doctest::Contains("duplicate"), io::FormatError);

    write_text(dir / "nofile.json", R"({"videos":[{"id":"zz","path":"zz.s5vt","n_frames":3,"dim":2}]})");
    CHECK_THROWS_WITH_AS(data::ingest_manifest(dir / "nofile.json"), doctest::Contains("zz"), io::FormatError);

    write_text(dir / "shape.json", R"({"videos":[{"id":"b","path":"b.s5vt","n_frames":3,"dim":5}]})");
    CHECK_THROWS_WITH_AS(data::ingest_manifest(dir / "shape.json"), doctest::Contains("'b'"), io::FormatError);

    write_text(dir / "notjson.json", "[1, 2");
    CHECK_THROWS(data::ingest_manifest(dir / "notjson.json"));
    fs::remove_all(dir);
}

TEST_CASE("synthetic corpus") {
    data::SynthOptions o;
    auto s = data::generate_synthetic(o);
    CHECK(s.queries.size() == 100);
    CHECK(s.database.size() == 400);
    for (int g = 0; g < 5; ++g) {
        CHECK(std::count(s.queries.labels.begin(), s.queries.labels.end(), g) == 20);
        CHECK(std::count(s.database.labels.begin(), s.database.labels.end(), g) == 80);
    }
    auto again = data::generate_synthetic(o);
    CHECK(again.database.frames == s.database.frames);

    o.videos = 20;
    o.dim = 3;
    o.frames = 4;
    auto small = data::generate_synthetic(o);
    auto dir = scratch_dir("synth");
    data::write_synthetic(small, dir);
    auto train = data::ingest_manifest(dir / "train.json");
    for (const auto& v : train.videos) CHECK(!v.label);
    auto db = data::load_dataset(data::ingest_manifest(dir / "database.json"));
    CHECK(db.labels == small.database.labels);
    CHECK(db.frames == small.database.frames);
    auto labels = io::read_json(dir / "labels.json");
    CHECK(labels.size() == 20);
    CHECK_THROWS(data::generate_synthetic({.classes = 3, .videos = 2}));
    fs::remove_all(dir);
}

TEST_CASE("mean features") {
    data::Dataset d;
    d.ids = {"x"};
    d.n_frames = 2;
    d.dim = 2;
    d.frames = {{1, 2, 3, 6}};
    auto m = data::mean_features(d);
    CHECK(m(0, 0) == 2.0);
    CHECK(m(0, 1) == 4.0);
}

TEST_CASE("scaling fit: exact polynomials") {
    std::vector<std::pair<double, double>> linear, quad;
    for (double l : {32.0, 64.0, 128.0, 256.0, 512.0}) {
        linear.emplace_back(l, 2 * l + 1);
        quad.emplace_back(l, l * l);
    }
    auto f = bench::fit_scaling(linear);
    CHECK(f.a == doctest::Approx(0.0).epsilon(1e-9).scale(1.0));
    CHECK(f.b == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(f.c == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.linear_slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f.linear_r2 == doctest::Approx(1.0).epsilon(1e-12));
    auto g = bench::fit_scaling(quad);
    CHECK(g.a == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(g.b) < 1e-6);
    CHECK(std::abs(g.c) < 1e-3);
    CHECK(g.quadratic_share(1024) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(g.linear_r2 < 1.0);
}

TEST_CASE("scaling fit matches the normal equations") {
    auto rng = RngStreams(3).stream("noise");
    std::vector<std::pair<double, double>> pts;
    for (double l : {32.0, 64.0, 128.0, 256.0, 512.0, 1024.0})
        for (int r = 0; r < 2; ++r) pts.emplace_back(l, 1e-4 * l * l + 0.3 * l + 5 + normal(rng));
    // oracle: (X^T X) beta = X^T y on a centred-and-scaled basis, mapped back
    const double s = 1024.0;
    Eigen::Matrix3d xtx = Eigen::Matrix3d::Zero();
    Eigen::Vector3d xty = Eigen::Vector3d::Zero();
    for (auto [l, t] : pts) {
        Eigen::Vector3d row(l * l / (s * s), l / s, 1.0);
        xtx += row * row.transpose();
        xty += row * t;
    }
    Eigen::Vector3d beta = xtx.ldlt().solve(xty);
    auto f = bench::fit_scaling(pts);
    CHECK(std::abs(f.a - beta(0) / (s * s)) <= 1e-9 * std::abs(beta(0) / (s * s)));
    CHECK(std::abs(f.b - beta(1) / s) <= 1e-9 * std::abs(beta(1) / s));
    CHECK(std::abs(f.c - beta(2)) <= 1e-9 * std::abs(beta(2)));

    std::vector<std::pair<double, double>> few{{1, 1}, {2, 2}, {3, 3}, {3, 4}};
    CHECK_THROWS_AS(bench::fit_scaling(few), Error);
}

TEST_CASE("median") {
    CHECK(bench::median({3.0}) == 3.0);
    CHECK(bench::median({5.0, 1.0, 3.0}) == 3.0);
    CHECK(bench::median({4.0, 1.0, 3.0, 2.0}) == 2.5);
    CHECK_THROWS(bench::median({}));
}

TEST_CASE("activation bytes and stress search") {
    auto w = identity_workload(1);
    CHECK(bench::activation_bytes(w, 5, 10) == 5 * 10 * 4);

    bench::StressOptions o;
    o.memory_budget_bytes = 1000;  // 200 bytes per batch unit of 5
    auto r = bench::stress_batch(w, 10, o);
    CHECK(r.max_batch == 25);
    CHECK(!r.capped);
    CHECK(!r.warning);

    o.memory_budget_bytes = 1 << 30;
    o.batch_cap = 40;
    r = bench::stress_batch(w, 10, o);
    CHECK(r.max_batch == 40);
    CHECK(r.capped);

    o.memory_budget_bytes = 0;
    r = bench::stress_batch(w, 10, o);
    CHECK(r.max_batch == 0);
    CHECK(r.warning);
}

TEST_CASE("timing with a single repeat") {
    auto w = identity_workload(2);
    auto t = bench::time_encode(w, 8, 2, {.warmup = 0, .repeats = 1});
    REQUIRE(t.samples_ms_per_sample.size() == 1);
    CHECK(t.median_ms_per_sample == t.samples_ms_per_sample[0]);
    CHECK_THROWS(bench::time_encode(w, 8, 0, {}));
}

TEST_CASE("pairwise reference layer") {
    bench::PairwiseMixingLayer layer(3, 1);
    auto x = Tensor::from({1, 2, 3}, {1, 0, 0, 0, 1, 0});
    auto y = layer.forward(x);
    CHECK(y.shape() == x.shape());
    CHECK_THROWS_AS(layer.forward(Tensor::zeros({1, 2, 4})), ShapeError);
    auto report = bench::run_bench(bench::quadratic_reference_workload(4, 0),
                                   {.lengths = {4, 8, 12, 16}, .batch = 1, .timing = {0, 1}, .probe_memory = false});
    CHECK(report.measurements.size() == 4);
    auto j = bench::to_json(report);
    CHECK(j["workload"] == "pairwise_quadratic_reference");
}
