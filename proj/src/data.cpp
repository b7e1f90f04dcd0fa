#include "s5vh/data.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "s5vh/io.hpp"
#include "s5vh/rng.hpp"

namespace s5vh::data {

namespace fs = std::filesystem;

DatasetManifest ingest_manifest(const fs::path& path) {
    auto doc = io::read_json(path);
    if (!doc.is_object() || !doc.contains("videos") || !doc["videos"].is_array()) {
        throw io::FormatError("manifest " + path.string() + ": expected an object with a 'videos' array");
    }
    DatasetManifest m;
    m.split = doc.value("split", std::string("train"));
    const fs::path base = path.parent_path();
    std::set<std::string> seen;
    std::size_t index = 0;
    for (const auto& v : doc["videos"]) {
        const std::string where = "manifest " + path.string() + " entry " + std::to_string(index++);
        for (const char* key : {"id", "path", "n_frames", "dim"}) {
            if (!v.contains(key)) throw io::FormatError(where + ": missing '" + key + "'");
        }
        ManifestEntry e;
        try {
            e.id = v["id"].get<std::string>();
            e.path = v["path"].get<std::string>();
            e.n_frames = v["n_frames"].get<std::size_t>();
            e.dim = v["dim"].get<std::size_t>();
            if (v.contains("label") && !v["label"].is_null()) e.label = v["label"].get<int>();
        } catch (const nlohmann::json::exception& ex) {
            throw io::FormatError(where + ": " + ex.what());
        }
        if (!seen.insert(e.id).second) throw io::FormatError(where + ": duplicate id '" + e.id + "'");
        if (e.path.is_relative()) e.path = base / e.path;
        if (!fs::exists(e.path)) throw io::FormatError(where + " (" + e.id + "): missing file " + e.path.string());
        auto header = io::read_tensor_header(e.path);
        if (header.shape != Shape{e.n_frames, e.dim}) {
            throw io::FormatError("video '" + e.id + "': declared shape [" + std::to_string(e.n_frames) + ", " +
                                  std::to_string(e.dim) + "] but file holds " + to_string(header.shape));
        }
        m.videos.push_back(std::move(e));
    }
    return m;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
    nlohmann::json videos = nlohmann::json::array();
    const fs::path base = path.parent_path();
    for (const auto& e : manifest.videos) {
        nlohmann::json v = {{"id", e.id},
                            {"path", e.path.lexically_proximate(base).generic_string()},
                            {"n_frames", e.n_frames},
                            {"dim", e.dim}};
        if (e.label) v["label"] = *e.label;
        videos.push_back(std::move(v));
    }
    io::write_json(path, {{"split", manifest.split}, {"videos", videos}});
}

Dataset load_dataset(const DatasetManifest& manifest) {
    if (manifest.videos.empty()) throw Error("dataset: manifest lists no videos");
    Dataset d;
    d.n_frames = manifest.videos.front().n_frames;
    d.dim = manifest.videos.front().dim;
    for (const auto& e : manifest.videos) {
        if (e.n_frames != d.n_frames || e.dim != d.dim) {
            throw Error("dataset: video '" + e.id + "' has shape [" + std::to_string(e.n_frames) + ", " +
                        std::to_string(e.dim) + "], expected [" + std::to_string(d.n_frames) + ", " +
                        std::to_string(d.dim) + "]");
        }
        Tensor t = io::read_tensor(e.path);
        d.ids.push_back(e.id);
        d.frames.emplace_back(t.data().begin(), t.data().end());
        d.labels.push_back(e.label.value_or(-1));
    }
    return d;
}

centers::Matrix mean_features(const Dataset& dataset) {
    centers::Matrix out = centers::Matrix::Zero(static_cast<Eigen::Index>(dataset.size()),
                                                static_cast<Eigen::Index>(dataset.dim));
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        for (std::size_t t = 0; t < dataset.n_frames; ++t)
            for (std::size_t j = 0; j < dataset.dim; ++j)
                out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += dataset.frames[i][t * dataset.dim + j];
    }
    out /= static_cast<double>(dataset.n_frames);
    return out;
}

SynthData generate_synthetic(const SynthOptions& o) {
    if (o.classes == 0 || o.videos < o.classes || o.frames < 2 || o.dim == 0) {
        throw Error("synth: need classes >= 1, videos >= classes, frames >= 2, dim >= 1");
    }
    RngStreams streams(o.seed);
    auto proto_rng = streams.stream("synth.prototypes");
    auto noise_rng = streams.stream("synth.frames");
    std::vector<std::vector<double>> prototypes(o.classes, std::vector<double>(o.dim));
    std::vector<std::vector<double>> directions(o.classes, std::vector<double>(o.dim));
    for (std::size_t g = 0; g < o.classes; ++g) {
        for (auto& v : prototypes[g]) v = normal(proto_rng);
        double norm = 0.0;
        for (auto& v : directions[g]) {
            v = normal(proto_rng);
            norm += v * v;
        }
        for (auto& v : directions[g]) v /= std::sqrt(norm);
    }

    SynthData out;
    for (Dataset* d : {&out.database, &out.queries}) {
        d->n_frames = o.frames;
        d->dim = o.dim;
    }
    std::vector<std::size_t> per_class_seen(o.classes, 0);
    const std::size_t per_class = o.videos / o.classes;
    const auto queries_per_class = static_cast<std::size_t>(std::llround(o.query_fraction * static_cast<double>(per_class)));
    for (std::size_t i = 0; i < o.videos; ++i) {
        const std::size_t g = i % o.classes;
        std::vector<double> frames(o.frames * o.dim);
        for (std::size_t t = 0; t < o.frames; ++t) {
            double phase = static_cast<double>(t) / static_cast<double>(o.frames - 1) - 0.5;
            for (std::size_t j = 0; j < o.dim; ++j) {
                double v = prototypes[g][j] + o.drift * phase * directions[g][j] + o.noise * normal(noise_rng);
                frames[t * o.dim + j] = round_to(DType::F32, v);
            }
        }
        char id[32];
        std::snprintf(id, sizeof id, "v%05zu", i);
        Dataset& target = per_class_seen[g]++ < queries_per_class ? out.queries : out.database;
        target.ids.emplace_back(id);
        target.frames.push_back(std::move(frames));
        target.labels.push_back(static_cast<int>(g));
    }
    return out;
}

void write_synthetic(const SynthData& data, const fs::path& out_dir) {
    fs::create_directories(out_dir / "features");
    nlohmann::json labels = nlohmann::json::object();
    auto emit_split = [&](const Dataset& d, const std::string& split) {
        DatasetManifest m{split, {}};
        for (std::size_t i = 0; i < d.size(); ++i) {
            fs::path file = out_dir / "features" / (d.ids[i] + ".s5vt");
            if (split != "database") {
                io::write_tensor(file, Tensor::from({d.n_frames, d.dim}, d.frames[i], DType::F32));
            }
            // training manifests carry no labels
            std::optional<int> label;
            if (split != "train") label = d.labels[i];
            m.videos.push_back({d.ids[i], file, d.n_frames, d.dim, label});
            labels[d.ids[i]] = d.labels[i];
        }
        return m;
    };
    auto train = emit_split(data.database, "train");
    auto database = emit_split(data.database, "database");
    auto queries = emit_split(data.queries, "query");
    write_manifest(out_dir / "train.json", train);
    write_manifest(out_dir / "database.json", database);
    write_manifest(out_dir / "query.json", queries);
    io::write_json(out_dir / "labels.json", labels);
}

}  // namespace s5vh::data
