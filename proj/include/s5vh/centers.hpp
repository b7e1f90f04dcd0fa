#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "s5vh/lbfgs.hpp"

namespace s5vh::centers {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct KMeansOptions {
    std::size_t max_iterations = 100;
    double tolerance = 1e-4;  // relative change of the within-cluster sum of squares
};

struct Centroids {
    Matrix centroids;                      // (N_c, D)
    std::vector<std::size_t> assignments;  // per input row
    std::vector<double> objective_trace;   // within-cluster sum of squares per iteration
    std::size_t iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations. Empty clusters are
/// reseeded to the point farthest from its current centroid.
Centroids kmeans(const Matrix& features, std::size_t clusters, std::uint64_t seed, const KMeansOptions& options = {});

/// Nearest centroid under Euclidean distance; ties go to the smallest index.
std::size_t assign_pseudo_label(std::span<const double> feature, const Matrix& centroids);

/// W_ij = cos(theta_i, theta_j). Throws on a zero-norm row.
Matrix cosine_matrix(const Matrix& centroids);

/// ||Phi Phi^T - K W||_F^2 + 1/2 sum_ij phi_i^T phi_j, with K = Phi.cols().
double center_objective(const Matrix& phi, const Matrix& similarity);

/// Gradient of center_objective: 4 (Phi Phi^T - K W) Phi + 1 1^T Phi.
Matrix center_objective_gradient(const Matrix& phi, const Matrix& similarity);

struct AdmmOptions {
    double mu_initial = 1e-4;
    double mu_growth = 1.03;
    double mu_max = 1e3;
    double eta = 1.0;
    std::size_t max_outer = 200;
    double tolerance = 1e-4;  // on max(||Phi - Psi_b||_inf, ||Phi - Psi_p||_inf)
    lbfgs::Options inner{};
};

struct AdmmState {
    Matrix phi;
    Matrix psi_box;
    Matrix psi_sphere;
    Matrix dual_box;
    Matrix dual_sphere;
    double mu_box = 0.0;
    double mu_sphere = 0.0;
    double eta = 1.0;
    std::size_t iteration = 0;
    std::vector<double> residual_box;
    std::vector<double> residual_sphere;
};

AdmmState initial_state(std::size_t centers, std::size_t bits, std::uint64_t seed, const AdmmOptions& options);

/// Minimizes the augmented Lagrangian over Phi with L-BFGS.
void phi_update(AdmmState& state, const Matrix& similarity, const lbfgs::Options& options);
/// Elementwise clamp to [-1, 1].
Matrix box_project(const Matrix& v);
/// sqrt(rows * cols) * v / ||v||_F.
Matrix sphere_project(const Matrix& v);
/// Psi updates followed by dual ascent on both constraints.
void psi_update(AdmmState& state);
void dual_ascent(AdmmState& state);
/// sign with sign(0) = +1.
Matrix binarize(const Matrix& phi);

struct HashCenterResult {
    Matrix centers;  // (N_c, K), entries +-1
    double objective = 0.0;
    double initial_objective = 0.0;  // of the binarized initialization
    std::vector<double> objective_trace;  // binarized objective per outer iteration
    std::vector<double> residual_box;
    std::vector<double> residual_sphere;
    std::size_t iterations = 0;
    std::size_t best_iteration = 0;  // 0 denotes the initialization
    bool converged = false;
};

/// Binary centers that follow the semantic similarity W while staying
/// mutually separated. Returns the best binarized iterate seen (initialization
/// included); `converged` is false when the residual tolerance was not met.
HashCenterResult generate_hash_centers(const Matrix& similarity, std::size_t bits, std::uint64_t seed,
                                       const AdmmOptions& options = {});

nlohmann::json report_json(const HashCenterResult& result, std::uint64_t seed);

}  // namespace s5vh::centers
