#include "s5vh/pipeline.hpp"

#include <cstdio>
#include <fstream>

#include "s5vh/io.hpp"

namespace s5vh::pipeline {

namespace {

Tensor matrix_tensor(const centers::Matrix& m) {
    std::vector<double> values(m.data(), m.data() + m.size());
    return Tensor::from({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(values),
                        DType::F64);
}

centers::Matrix tensor_matrix(const Tensor& t, const fs::path& path) {
    if (t.rank() != 2) throw io::FormatError(path.string() + ": expected a matrix, got " + to_string(t.shape()));
    centers::Matrix m(static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
    std::copy(t.data().begin(), t.data().end(), m.data());
    return m;
}

fs::path require_file(const fs::path& path) {
    if (!fs::exists(path)) throw io::IoError("missing input " + path.string());
    return path;
}

}  // namespace

ClusterOutput run_cluster(const fs::path& manifest, std::size_t n_centers, std::uint64_t seed, const fs::path& out_dir) {
    auto dataset = data::load_dataset(data::ingest_manifest(manifest));
    auto features = data::mean_features(dataset);
    ClusterOutput out;
    out.ids = dataset.ids;
    out.centroids = centers::kmeans(features, n_centers, seed);
    out.similarity = centers::cosine_matrix(out.centroids.centroids);

    fs::create_directories(out_dir);
    io::write_tensor(out_dir / "centroids.s5vt", matrix_tensor(out.centroids.centroids));
    io::write_tensor(out_dir / "similarity.s5vt", matrix_tensor(out.similarity));
    std::vector<double> labels(out.centroids.assignments.begin(), out.centroids.assignments.end());
    io::write_tensor(out_dir / "assignments.s5vt", Tensor::from({labels.size()}, labels, DType::F64));
    nlohmann::json by_id = nlohmann::json::object();
    for (std::size_t i = 0; i < out.ids.size(); ++i) by_id[out.ids[i]] = out.centroids.assignments[i];
    io::write_json(out_dir / "assignments.json", by_id);
    io::write_json(out_dir / "cluster_report.json", {{"seed", seed},
                                                      {"n_centers", n_centers},
                                                      {"iterations", out.centroids.iterations},
                                                      {"objective_trace", out.centroids.objective_trace}});
    return out;
}

centers::HashCenterResult run_centers(const fs::path& cluster_dir, std::size_t bits, std::uint64_t seed,
                                      const fs::path& out_dir, const centers::AdmmOptions& options) {
    const fs::path sim_path = require_file(cluster_dir / "similarity.s5vt");
    auto similarity = tensor_matrix(io::read_tensor(sim_path), sim_path);
    auto result = centers::generate_hash_centers(similarity, bits, seed, options);
    fs::create_directories(out_dir);
    if (!fs::equivalent(cluster_dir, out_dir)) {
        for (const char* name : {"centroids.s5vt", "similarity.s5vt", "assignments.s5vt", "assignments.json"}) {
            fs::copy_file(require_file(cluster_dir / name), out_dir / name, fs::copy_options::overwrite_existing);
        }
    }
    io::write_tensor(out_dir / "hash_centers.s5vt", matrix_tensor(result.centers));
    auto report = centers::report_json(result, seed);
    report["bits"] = bits;
    report["n_centers"] = similarity.rows();
    io::write_json(out_dir / "report.json", report);
    return result;
}

training::CenterTargets load_center_targets(const fs::path& centers_dir, const std::vector<std::string>& ids) {
    training::CenterTargets targets;
    targets.centers = io::read_tensor(require_file(centers_dir / "hash_centers.s5vt"));
    if (targets.centers.rank() != 2) throw io::FormatError("hash_centers.s5vt: expected a matrix");
    auto by_id = io::read_json(require_file(centers_dir / "assignments.json"));
    for (const auto& id : ids) {
        if (!by_id.contains(id)) throw io::FormatError("assignments.json: no pseudo label for video '" + id + "'");
        auto label = by_id[id].get<std::size_t>();
        if (label >= targets.centers.dim(0)) {
            throw io::FormatError("assignments.json: label of '" + id + "' exceeds the number of centers");
        }
        targets.pseudo_labels.push_back(label);
    }
    return targets;
}

training::TrainConfig load_train_config(const fs::path& path, std::size_t feature_dim, std::size_t code_bits) {
    auto doc = io::read_json(path);
    if (!doc.is_object()) throw io::FormatError(path.string() + ": expected a JSON object");
    if (!doc.contains("model")) doc["model"] = nlohmann::json::object();
    if (!doc["model"].contains("feature_dim")) doc["model"]["feature_dim"] = feature_dim;
    if (!doc["model"].contains("code_bits")) doc["model"]["code_bits"] = code_bits;
    try {
        return doc.get<training::TrainConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw io::FormatError(path.string() + ": " + e.what());
    } catch (const ShapeError&) {
        throw;
    } catch (const Error& e) {
        throw io::FormatError(path.string() + ": " + e.what());
    }
}

void save_model(const fs::path& checkpoint_dir, const S5vhModel& model) {
    io::save_checkpoint(checkpoint_dir, model.parameters(true));
    io::write_json(checkpoint_dir / "model.json",
                   {{"config", model.config()}, {"dtype", model.dtype() == DType::F32 ? "f32" : "f64"}});
}

S5vhModel load_model(const fs::path& checkpoint_dir) {
    auto meta = io::read_json(require_file(checkpoint_dir / "model.json"));
    auto config = meta.at("config").get<ModelConfig>();
    DType dtype = meta.value("dtype", std::string("f32")) == "f64" ? DType::F64 : DType::F32;
    S5vhModel model(config, dtype, 0);
    io::load_checkpoint(checkpoint_dir, model.parameters(true));
    return model;
}

training::TrainResult run_train(const fs::path& manifest, const fs::path& centers_dir, const fs::path& config_path,
                                const fs::path& out_dir) {
    auto dataset = data::load_dataset(data::ingest_manifest(manifest));
    training::CenterTargets targets = load_center_targets(centers_dir, dataset.ids);
    auto config = load_train_config(config_path, dataset.dim, targets.centers.dim(1));
    auto result = training::train(dataset, targets, config);

    fs::create_directories(out_dir);
    save_model(out_dir / "checkpoint", result.model);
    training::write_train_log(out_dir / "train_log.csv", result.steps);
    io::write_json(out_dir / "config_resolved.json", training::resolved_config(config));
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : result.epochs) epochs.push_back({{"epoch", e.epoch}, {"mean_total", e.mean_total}, {"lr", e.lr}});
    io::write_json(out_dir / "summary.json", {{"best_epoch", result.best_epoch},
                                              {"early_stopped", result.early_stopped},
                                              {"epochs_run", result.epochs.size()},
                                              {"epochs", epochs}});
    return result;
}

hashing::PackedCodes run_encode(const fs::path& checkpoint_dir, const fs::path& manifest_path, const fs::path& out_codes) {
    auto manifest = data::ingest_manifest(manifest_path);
    if (manifest.videos.empty()) throw Error("encode: manifest " + manifest_path.string() + " lists no videos");
    auto model = load_model(checkpoint_dir);
    hashing::PackedCodes codes(model.config().code_bits);
    std::vector<std::string> ids;
    for (const auto& e : manifest.videos) {
        if (e.dim != model.config().feature_dim) {
            throw ShapeError("encode: video '" + e.id + "' has dim " + std::to_string(e.dim) + ", model expects " +
                             std::to_string(model.config().feature_dim));
        }
        auto code = model.encode(io::read_tensor(e.path).to(model.dtype()));
        codes.push_back(code);
        ids.push_back(e.id);
    }
    if (out_codes.has_parent_path()) fs::create_directories(out_codes.parent_path());
    hashing::write_codes(out_codes, codes, ids);
    return codes;
}

std::vector<int> labels_for(const nlohmann::json& labels, const std::vector<std::string>& ids) {
    std::vector<int> out;
    for (const auto& id : ids) {
        if (!labels.contains(id)) throw io::FormatError("labels: no label for video '" + id + "'");
        out.push_back(labels[id].get<int>());
    }
    return out;
}

EvalResult run_eval(const fs::path& queries_path, const fs::path& database_path, const fs::path& labels_path,
                    const fs::path& out_json) {
    std::vector<std::string> qids, dids;
    auto queries = hashing::read_codes(require_file(queries_path), &qids);
    auto database = hashing::read_codes(require_file(database_path), &dids);
    if (queries.bits() != database.bits()) {
        throw ShapeError("eval: query codes have " + std::to_string(queries.bits()) + " bits, database codes " +
                         std::to_string(database.bits()));
    }
    if (queries.empty() || database.empty()) throw Error("eval: empty query or database code file");
    auto labels = io::read_json(require_file(labels_path));
    auto qlabels = labels_for(labels, qids);
    auto dlabels = labels_for(labels, dids);

    EvalResult r;
    r.map = retrieval::map_at_cutoffs(queries, qlabels, database, dlabels, retrieval::kStandardCutoffs);
    r.gmap = retrieval::gmap(r.map);
    r.pr = retrieval::pr_curve(queries, qlabels, database, dlabels);

    nlohmann::json table = nlohmann::json::object();
    for (std::size_t i = 0; i < r.map.size(); ++i) table[std::to_string(retrieval::kStandardCutoffs[i])] = r.map[i];
    const fs::path pr_path = out_json.parent_path() / (out_json.stem().string() + "_pr.csv");
    if (out_json.has_parent_path()) fs::create_directories(out_json.parent_path());
    io::write_json(out_json, {{"map", table},
                              {"gmap", r.gmap},
                              {"bits", queries.bits()},
                              {"n_queries", queries.size()},
                              {"n_database", database.size()},
                              {"relevance", "identical label"},
                              {"rel_n", "relevant items within the top N"},
                              {"pr_csv", pr_path.filename().string()}});
    std::ofstream os(pr_path);
    if (!os) throw io::IoError("cannot open " + pr_path.string() + " for writing");
    os << "radius,precision,recall\n";
    char line[96];
    for (const auto& p : r.pr) {
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", p.radius, p.precision, p.recall);
        os << line;
    }
    return r;
}

}  // namespace s5vh::pipeline
