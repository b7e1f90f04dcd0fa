#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "s5vh/centers.hpp"
#include "s5vh/tensor.hpp"

namespace s5vh::data {

struct ManifestEntry {
    std::string id;
    std::filesystem::path path;  // resolved against the manifest directory
    std::size_t n_frames = 0;
    std::size_t dim = 0;
    std::optional<int> label;
};

/// {"split": "...", "videos": [{"id", "path", "n_frames", "dim", "label"?}]}
struct DatasetManifest {
    std::string split;
    std::vector<ManifestEntry> videos;
};

/// Parses and validates a manifest: schema, unique ids, and that each
/// referenced tensor file exists with shape (n_frames, dim).
DatasetManifest ingest_manifest(const std::filesystem::path& path);
/// Paths are written relative to the manifest's directory when possible.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Feature matrices of equally shaped videos, loaded in manifest order.
struct Dataset {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> frames;  // each n_frames x dim, row-major
    std::vector<int> labels;                  // -1 where absent
    std::size_t n_frames = 0;
    std::size_t dim = 0;

    std::size_t size() const { return ids.size(); }
};

Dataset load_dataset(const DatasetManifest& manifest);

/// Temporally averaged feature per video, (N, D).
centers::Matrix mean_features(const Dataset& dataset);

struct SynthOptions {
    std::size_t classes = 5;
    std::size_t videos = 500;
    std::size_t frames = 16;
    std::size_t dim = 32;
    std::uint64_t seed = 7;
    double noise = 0.3;
    double drift = 1.0;
    double query_fraction = 0.2;
};

struct SynthData {
    Dataset database;  // also the training corpus
    Dataset queries;
};

/// Class prototypes ~ N(0, I_D); frame t of a class-g video is
/// prototype_g + drift * (t/(T-1) - 1/2) * direction_g + N(0, noise^2 I).
/// Every class contributes query_fraction of its videos to the query set.
SynthData generate_synthetic(const SynthOptions& options);

/// Writes features/<id>.s5vt plus train.json, database.json, query.json and
/// labels.json (id -> label) under `out_dir`.
void write_synthetic(const SynthData& data, const std::filesystem::path& out_dir);

}  // namespace s5vh::data
