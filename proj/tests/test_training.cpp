#include <cmath>
#include <set>

#include "doctest.h"
#include "s5vh/data.hpp"
#include "s5vh/rng.hpp"
#include "s5vh/training.hpp"

using namespace s5vh;

namespace {

data::Dataset tiny_dataset() {
    data::SynthOptions o;
    o.classes = 2;
    o.videos = 12;
    o.frames = 6;
    o.dim = 4;
    o.query_fraction = 0.0;
    return data::generate_synthetic(o).database;
}

training::TrainConfig tiny_config() {
    training::TrainConfig c;
    c.model.feature_dim = 4;
    c.model.code_bits = 4;
    c.model.encoder_dim = 4;
    c.model.decoder_dim = 4;
    c.model.encoder_layers = 1;
    c.model.decoder_layers = 1;
    c.model.mamba.state_size = 2;
    c.model.mamba.conv_width = 2;
    c.n_centers = 2;
    c.batch_size = 5;
    c.max_epochs = 4;
    return c;
}

training::CenterTargets tiny_targets(const data::Dataset& d) {
    training::CenterTargets t;
    t.centers = Tensor::from({2, 4}, {1, 1, -1, -1, -1, 1, 1, -1}, DType::F32);
    for (std::size_t i = 0; i < d.size(); ++i) t.pseudo_labels.push_back(static_cast<std::size_t>(d.labels[i]));
    return t;
}

}  // namespace

TEST_CASE("masked frame counts") {
    CHECK(training::masked_count(30, 0.5) == 15);
    CHECK(training::masked_count(25, 0.75) == 19);
    CHECK(training::masked_count(16, 0.5) == 8);
    CHECK_THROWS_AS(training::masked_count(2, 0.1), Error);
    CHECK_THROWS_AS(training::masked_count(4, 0.9), Error);
    CHECK_THROWS_AS(training::masked_count(1, 0.5), Error);
    CHECK_THROWS_AS(training::masked_count(10, 1.0), Error);
}

TEST_CASE("views partition the frames and are reproducible") {
    auto rng = RngStreams(1).stream("masks");
    auto [a, b] = training::make_views(30, 0.5, rng);
    for (const auto* v : {&a, &b}) {
        CHECK(v->masked.size() == 15);
        CHECK(std::is_sorted(v->visible.begin(), v->visible.end()));
        std::set<std::size_t> all(v->visible.begin(), v->visible.end());
        all.insert(v->masked.begin(), v->masked.end());
        CHECK(all.size() == 30);
        CHECK(*all.rbegin() == 29);
    }
    CHECK(a.view == 1);
    CHECK(b.view == 2);
    auto rng2 = RngStreams(1).stream("masks");
    auto [a2, b2] = training::make_views(30, 0.5, rng2);
    CHECK(a2.masked == a.masked);
    CHECK(b2.masked == b.masked);
    CHECK(a.masked != b.masked);  // independent draws; equal with probability 1/C(30,15)
}

TEST_CASE("cosine schedule") {
    CHECK(training::step_schedule(0, 101, 5e-4, 1e-5) == doctest::Approx(5e-4).epsilon(1e-14));
    CHECK(training::step_schedule(100, 101, 5e-4, 1e-5) == doctest::Approx(1e-5).epsilon(1e-12));
    CHECK(training::step_schedule(50, 101, 5e-4, 1e-5) == doctest::Approx(2.55e-4).epsilon(1e-12));
    double previous = 1.0;
    for (std::size_t e = 0; e < 350; ++e) {
        double lr = training::step_schedule(e, 350, 5e-4, 1e-5);
        CHECK(lr <= previous);
        previous = lr;
    }
    CHECK_THROWS_AS(training::step_schedule(10, 10, 5e-4, 1e-5), Error);
}

TEST_CASE("AdamW first step") {
    Tensor w = Tensor::from({2}, {1.0, -2.0}, DType::F64, true);
    training::AdamW opt({{"w", w}}, 0.9, 0.999, 1e-8, 0.01);
    auto g = w.grad_buffer();
    g[0] = 0.5;
    g[1] = -3.0;
    opt.step(0.1);
    // bias-corrected first step moves by lr * g / (|g| + eps) after decay
    CHECK(w.data()[0] == doctest::Approx(1.0 * (1 - 0.001) - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
    CHECK(w.data()[1] == doctest::Approx(-2.0 * (1 - 0.001) + 0.1 * 3.0 / (3.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("config validation and JSON round-trip") {
    training::TrainConfig c;
    c.validate();
    c.mask_ratio = 1.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = training::TrainConfig{};
    c.lr_min = 1e-3;
    CHECK_THROWS_AS(c.validate(), Error);
    c = training::TrainConfig{};
    c.patience = 0;
    CHECK_THROWS_AS(c.validate(), Error);

    auto t = tiny_config();
    nlohmann::json j = t;
    auto back = j.get<training::TrainConfig>();
    CHECK(nlohmann::json(back) == j);
    auto defaults = nlohmann::json::object().get<training::TrainConfig>();
    CHECK(defaults.lr_max == 5e-4);
    CHECK(defaults.max_epochs == 350);
    CHECK(defaults.patience == 5);
    CHECK(defaults.model.encoder_layers == 6);
}

TEST_CASE("training is reproducible and restores the best epoch") {
    auto d = tiny_dataset();
    auto targets = tiny_targets(d);
    auto config = tiny_config();
    auto r1 = training::train(d, targets, config);
    auto r2 = training::train(d, targets, config);
    REQUIRE(r1.steps.size() == r2.steps.size());
    CHECK(r1.steps.size() == 4 * 3);  // 12 videos in batches of 5, 5, 2
    for (std::size_t i = 0; i < r1.steps.size(); ++i) {
        CHECK(r1.steps[i].total == r2.steps[i].total);
        CHECK(r1.steps[i].reconstruction == r2.steps[i].reconstruction);
    }
    auto p1 = r1.model.parameters(), p2 = r2.model.parameters();
    for (std::size_t k = 0; k < p1.size(); ++k)
        CHECK(std::vector<double>(p1[k].second.data().begin(), p1[k].second.data().end()) ==
              std::vector<double>(p2[k].second.data().begin(), p2[k].second.data().end()));
    for (const auto& s : r1.steps) {
        CHECK(s.total == doctest::Approx(s.reconstruction + s.contrastive + s.alignment).epsilon(1e-5));
        CHECK(s.lr == training::step_schedule(s.epoch, config.max_epochs, config.lr_max, config.lr_min));
    }
    double best = INFINITY;
    for (const auto& e : r1.epochs) best = std::min(best, e.mean_total);
    CHECK(r1.epochs[r1.best_epoch].mean_total == best);
}

TEST_CASE("early stopping waits exactly `patience` stale epochs") {
    auto d = tiny_dataset();
    auto config = tiny_config();
    config.max_epochs = 20;
    config.patience = 3;
    config.min_delta = 1e9;  // nothing after the first epoch counts as an improvement
    std::vector<std::size_t> seen;
    auto r = training::train(d, tiny_targets(d), config,
                             [&](const training::EpochSummary& s, const S5vhModel&) { seen.push_back(s.epoch); });
    CHECK(r.early_stopped);
    CHECK(r.epochs.size() == config.patience + 1);
    CHECK(seen.size() == r.epochs.size());
    CHECK(r.best_epoch == 0);
    CHECK(r.epochs[0].improved);
}

TEST_CASE("both views share one parameter set") {
    auto d = tiny_dataset();
    auto r = training::train(d, tiny_targets(d), tiny_config());
    auto a = r.model.parameters(), b = r.model.parameters();
    std::set<const TensorImpl*> unique;
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].second.impl() == b[k].second.impl());
        unique.insert(a[k].second.impl());
    }
    CHECK(unique.size() == a.size());
    auto inference = r.model.parameters(true);
    CHECK(inference.size() < a.size());
    for (const auto& [name, p] : inference) {
        CHECK(name.rfind("decoder", 0) != 0);
        CHECK(name != "mask_token");
    }
}

TEST_CASE("training without center alignment needs no centers") {
    auto d = tiny_dataset();
    auto config = tiny_config();
    config.center_alignment = false;
    config.max_epochs = 1;
    auto r = training::train(d, {}, config);
    for (const auto& s : r.steps) CHECK(s.alignment == 0.0);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
    auto d = tiny_dataset();
    d.frames[3][0] = NAN;
    auto config = tiny_config();
    try {
        training::train(d, tiny_targets(d), config);
        FAIL("expected NonFiniteLossError");
    } catch (const training::NonFiniteLossError& e) {
        CHECK(e.diagnostic.contains("batch"));
        CHECK(e.diagnostic.contains("videos"));
        CHECK(e.diagnostic["epoch"] == 0);
    }
}

TEST_CASE("training rejects mismatched inputs") {
    auto d = tiny_dataset();
    auto config = tiny_config();
    config.model.feature_dim = 5;
    CHECK_THROWS_AS(training::train(d, tiny_targets(d), config), ShapeError);
    auto targets = tiny_targets(d);
    targets.pseudo_labels.pop_back();
    CHECK_THROWS_AS(training::train(d, targets, tiny_config()), Error);
}

TEST_CASE("unknown config keys are rejected") {
    CHECK_THROWS_WITH(nlohmann::json({{"max_epoch", 3}}).get<training::TrainConfig>(), doctest::Contains("max_epoch"));
    CHECK_THROWS_WITH(nlohmann::json({{"model", {{"mamba", {{"state_size", 4}}}}}}).get<training::TrainConfig>(),
                      doctest::Contains("mamba"));
    auto resolved = training::resolved_config(tiny_config());
    CHECK(nlohmann::json(resolved.get<training::TrainConfig>()) == nlohmann::json(tiny_config()));
}
