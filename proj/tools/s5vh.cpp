#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "s5vh/bench.hpp"
#include "s5vh/gradcheck.hpp"
#include "s5vh/io.hpp"
#include "s5vh/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace s5vh;

namespace {

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

std::vector<std::size_t> parse_lengths(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != item.size() || v == 0) throw Error("bench: bad length '" + item + "' in --lengths");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

int run_bench_command(const fs::path& config_path, const std::string& lengths, const fs::path& checkpoint,
                      const fs::path& out) {
    json cfg = config_path.empty() ? json::object() : io::read_json(config_path);
    bench::BenchOptions options;
    options.lengths = parse_lengths(lengths);
    options.batch = cfg.value("batch", options.batch);
    options.timing.warmup = cfg.value("warmup", options.timing.warmup);
    options.timing.repeats = cfg.value("repeats", options.timing.repeats);
    options.stress.memory_budget_bytes = cfg.value("memory_budget_bytes", options.stress.memory_budget_bytes);
    options.stress.batch_cap = cfg.value("batch_cap", options.stress.batch_cap);
    options.probe_memory = cfg.value("probe_memory", options.probe_memory);

    S5vhModel model = checkpoint.empty()
                          ? S5vhModel(cfg.value("model", ModelConfig{}), DType::F32, cfg.value("seed", std::uint64_t{0}))
                          : pipeline::load_model(checkpoint);
    json report = {{"config", cfg}, {"lengths", options.lengths}, {"workloads", json::array()}};
    report["workloads"].push_back(bench::to_json(bench::run_bench(bench::scan_encoder_workload(model), options)));
    if (cfg.value("reference", true)) {
        auto reference = bench::quadratic_reference_workload(cfg.value("reference_dim", std::size_t{32}), 0);
        auto ref_options = options;
        ref_options.probe_memory = false;
        report["workloads"].push_back(bench::to_json(bench::run_bench(reference, ref_options)));
    }
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    io::write_json(out, report);
    print_json({{"report", out.string()}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-supervised video hashing with selective state-space encoders"};
    app.require_subcommand(1);

    data::SynthOptions synth;
    fs::path synth_out;
    auto* c_synth = app.add_subcommand("synth", "Generate the synthetic clustered video dataset");
    c_synth->add_option("--classes", synth.classes)->capture_default_str();
    c_synth->add_option("--videos", synth.videos)->capture_default_str();
    c_synth->add_option("--frames", synth.frames)->capture_default_str();
    c_synth->add_option("--dim", synth.dim)->capture_default_str();
    c_synth->add_option("--seed", synth.seed)->capture_default_str();
    c_synth->add_option("--noise", synth.noise)->capture_default_str();
    c_synth->add_option("--drift", synth.drift)->capture_default_str();
    c_synth->add_option("--query-fraction", synth.query_fraction)->capture_default_str();
    c_synth->add_option("--out", synth_out)->required();

    fs::path manifest, out, centers_dir, config, cluster_dir, checkpoint;
    std::size_t n_centers = 100, bits = 16;
    std::uint64_t seed = 0;

    auto* c_cluster = app.add_subcommand("cluster", "k-means over temporally averaged features");
    c_cluster->add_option("--manifest", manifest)->required();
    c_cluster->add_option("--n-centers", n_centers)->capture_default_str();
    c_cluster->add_option("--seed", seed)->capture_default_str();
    c_cluster->add_option("--out", out)->required();

    auto* c_centers = app.add_subcommand("centers", "Binary hash centers from cluster similarity");
    auto* o_cluster = c_centers->add_option("--cluster", cluster_dir, "output directory of `cluster`");
    auto* o_manifest = c_centers->add_option("--manifest", manifest, "cluster this manifest first");
    o_cluster->excludes(o_manifest);
    c_centers->add_option("--n-centers", n_centers, "with --manifest")->capture_default_str();
    c_centers->add_option("--bits", bits)->capture_default_str();
    c_centers->add_option("--seed", seed)->capture_default_str();
    c_centers->add_option("--out", out)->required();

    auto* c_train = app.add_subcommand("train", "Self-supervised training");
    c_train->add_option("--manifest", manifest)->required();
    c_train->add_option("--centers", centers_dir)->required();
    c_train->add_option("--config", config)->required();
    c_train->add_option("--out", out)->required();

    auto* c_encode = app.add_subcommand("encode", "Encode a manifest into packed binary codes");
    c_encode->add_option("--checkpoint", checkpoint)->required();
    c_encode->add_option("--manifest", manifest)->required();
    c_encode->add_option("--out", out)->required();

    fs::path queries, database, labels;
    auto* c_eval = app.add_subcommand("eval", "mAP@N, GmAP and PR curve");
    c_eval->add_option("--queries", queries)->required();
    c_eval->add_option("--database", database)->required();
    c_eval->add_option("--labels", labels)->required();
    c_eval->add_option("--out", out)->required();

    std::string lengths = "32,64,128,256,512,1024";
    auto* c_bench = app.add_subcommand("bench", "Encode time and memory versus sequence length");
    c_bench->add_option("--config", config);
    c_bench->add_option("--checkpoint", checkpoint, "trained model instead of a fresh one");
    c_bench->add_option("--lengths", lengths)->capture_default_str();
    c_bench->add_option("--out", out)->required();

    double tolerance = 1e-4;
    auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
    c_grad->add_option("--seed", seed)->capture_default_str();
    c_grad->add_option("--tolerance", tolerance)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << json{{"error", {{"type", "usage"}, {"message", e.what()}}}}.dump() << "\n";
        return 2;
    }

    try {
        if (*c_synth) {
            data::write_synthetic(data::generate_synthetic(synth), synth_out);
            print_json({{"out", synth_out.string()}, {"train", "train.json"}, {"database", "database.json"},
                        {"queries", "query.json"}, {"labels", "labels.json"}});
        } else if (*c_cluster) {
            auto r = pipeline::run_cluster(manifest, n_centers, seed, out);
            print_json({{"out", out.string()}, {"videos", r.ids.size()}, {"iterations", r.centroids.iterations}});
        } else if (*c_centers) {
            if (cluster_dir.empty() && manifest.empty()) throw Error("centers: need --cluster or --manifest");
            if (!manifest.empty()) {
                pipeline::run_cluster(manifest, n_centers, seed, out);
                cluster_dir = out;
            }
            auto r = pipeline::run_centers(cluster_dir, bits, seed, out);
            print_json({{"out", out.string()}, {"objective", r.objective}, {"converged", r.converged},
                        {"iterations", r.iterations}});
        } else if (*c_train) {
            auto r = pipeline::run_train(manifest, centers_dir, config, out);
            print_json({{"out", out.string()}, {"epochs_run", r.epochs.size()}, {"best_epoch", r.best_epoch},
                        {"early_stopped", r.early_stopped}});
        } else if (*c_encode) {
            auto codes = pipeline::run_encode(checkpoint, manifest, out);
            print_json({{"out", out.string()}, {"items", codes.size()}, {"bits", codes.bits()}});
        } else if (*c_eval) {
            auto r = pipeline::run_eval(queries, database, labels, out);
            print_json({{"out", out.string()}, {"map", r.map}, {"gmap", r.gmap}});
        } else if (*c_bench) {
            return run_bench_command(config, lengths, checkpoint, out);
        } else if (*c_grad) {
            json rows = json::array();
            bool ok = true;
            for (const auto& c : gradient_suite(seed)) {
                double err = grad_check(c.f, c.inputs);
                ok = ok && err <= tolerance;
                rows.push_back({{"name", c.name}, {"max_rel_error", err}, {"pass", err <= tolerance}});
            }
            print_json({{"tolerance", tolerance}, {"cases", rows}, {"pass", ok}});
            return ok ? 0 : 1;
        }
    } catch (const training::NonFiniteLossError& e) {
        std::cerr << json{{"error", {{"type", "non_finite_loss"}, {"message", e.what()}, {"diagnostic", e.diagnostic}}}}.dump()
                  << "\n";
        return 1;
    } catch (const io::FormatError& e) {
        std::cerr << json{{"error", {{"type", "format"}, {"message", e.what()}}}}.dump() << "\n";
        return 1;
    } catch (const io::IoError& e) {
        std::cerr << json{{"error", {{"type", "io"}, {"message", e.what()}}}}.dump() << "\n";
        return 1;
    } catch (const ShapeError& e) {
        std::cerr << json{{"error", {{"type", "shape"}, {"message", e.what()}}}}.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"type", "runtime"}, {"message", e.what()}}}}.dump() << "\n";
        return 1;
    }
    return 0;
}
