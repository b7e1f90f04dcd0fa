#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "s5vh/centers.hpp"
#include "s5vh/data.hpp"
#include "s5vh/retrieval.hpp"
#include "s5vh/training.hpp"

// File-level stages shared by the command-line tool, the tests and the
// Python module. Every stage reads and writes the formats in FORMATS.md.
namespace s5vh::pipeline {

namespace fs = std::filesystem;

struct ClusterOutput {
    std::vector<std::string> ids;
    centers::Centroids centroids;
    centers::Matrix similarity;
};

/// k-means over temporally averaged features. Writes centroids.s5vt,
/// assignments.s5vt, assignments.json and similarity.s5vt.
ClusterOutput run_cluster(const fs::path& manifest, std::size_t n_centers, std::uint64_t seed, const fs::path& out_dir);

/// Hash centers from a cluster directory's similarity matrix. Writes
/// hash_centers.s5vt and report.json.
centers::HashCenterResult run_centers(const fs::path& cluster_dir, std::size_t bits, std::uint64_t seed,
                                      const fs::path& out_dir, const centers::AdmmOptions& options = {});

/// Pseudo labels (per manifest id) and hash centers from a centers directory.
training::CenterTargets load_center_targets(const fs::path& centers_dir, const std::vector<std::string>& ids);

/// Reads a TrainConfig JSON. feature_dim and code_bits left unset in the
/// "model" object are filled from the data and the centers.
training::TrainConfig load_train_config(const fs::path& path, std::size_t feature_dim, std::size_t code_bits);

/// Writes checkpoint/ (inference parameters + model.json), train_log.csv,
/// config_resolved.json and summary.json.
training::TrainResult run_train(const fs::path& manifest, const fs::path& centers_dir, const fs::path& config,
                                const fs::path& out_dir);

void save_model(const fs::path& checkpoint_dir, const S5vhModel& model);
S5vhModel load_model(const fs::path& checkpoint_dir);

/// Encodes every video of a manifest; throws on an empty manifest.
hashing::PackedCodes run_encode(const fs::path& checkpoint_dir, const fs::path& manifest, const fs::path& out_codes);

struct EvalResult {
    std::vector<double> map;  // at retrieval::kStandardCutoffs
    double gmap = 0.0;
    std::vector<retrieval::PrPoint> pr;
};

/// Looks up each id in a JSON object id -> label.
std::vector<int> labels_for(const nlohmann::json& labels, const std::vector<std::string>& ids);

/// Writes `out_json` and a PR curve CSV next to it (<stem>_pr.csv).
EvalResult run_eval(const fs::path& queries, const fs::path& database, const fs::path& labels, const fs::path& out_json);

}  // namespace s5vh::pipeline
