#include "s5vh/centers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "s5vh/rng.hpp"
#include "s5vh/tensor.hpp"

namespace s5vh::centers {

namespace {

double squared_distance(const double* a, const double* b, Eigen::Index d) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        double t = a[j] - b[j];
        acc += t * t;
    }
    return acc;
}

std::size_t nearest(const double* point, const Matrix& centroids, double* best_dist = nullptr) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        double d = squared_distance(point, centroids.row(c).data(), centroids.cols());
        if (d < bd) {
            bd = d;
            best = static_cast<std::size_t>(c);
        }
    }
    if (best_dist) *best_dist = bd;
    return best;
}

}  // namespace

Centroids kmeans(const Matrix& features, std::size_t clusters, std::uint64_t seed, const KMeansOptions& options) {
    const auto n = static_cast<std::size_t>(features.rows());
    const auto d = features.cols();
    if (clusters == 0) throw Error("kmeans: need at least one cluster");
    if (n < clusters) {
        throw Error("kmeans: " + std::to_string(n) + " points cannot form " + std::to_string(clusters) + " clusters");
    }
    auto rng = RngStreams(seed).stream("kmeans");

    // k-means++ seeding
    Matrix centroids(static_cast<Eigen::Index>(clusters), d);
    centroids.row(0) = features.row(static_cast<Eigen::Index>(uniform_index(rng, n)));
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    for (std::size_t c = 1; c < clusters; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto ii = static_cast<Eigen::Index>(i);
            dist[i] = std::min(dist[i], squared_distance(features.row(ii).data(),
                                                         centroids.row(static_cast<Eigen::Index>(c - 1)).data(), d));
            total += dist[i];
        }
        std::size_t pick = 0;
        if (total > 0) {
            double target = uniform01(rng) * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dist[i];
                if (acc > target && dist[i] > 0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = uniform_index(rng, n);
        }
        centroids.row(static_cast<Eigen::Index>(c)) = features.row(static_cast<Eigen::Index>(pick));
    }

    Centroids out;
    out.assignments.assign(n, 0);
    std::vector<double> point_dist(n);
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            out.assignments[i] = nearest(features.row(static_cast<Eigen::Index>(i)).data(), centroids, &point_dist[i]);
            objective += point_dist[i];
        }
        out.objective_trace.push_back(objective);
        out.iterations = it + 1;

        Matrix sums = Matrix::Zero(centroids.rows(), d);
        std::vector<std::size_t> counts(clusters, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums.row(static_cast<Eigen::Index>(out.assignments[i])) += features.row(static_cast<Eigen::Index>(i));
            ++counts[out.assignments[i]];
        }
        for (std::size_t c = 0; c < clusters; ++c) {
            auto cc = static_cast<Eigen::Index>(c);
            if (counts[c] > 0) {
                centroids.row(cc) = sums.row(cc) / static_cast<double>(counts[c]);
                continue;
            }
            // empty cluster: take over the point farthest from its centroid
            auto far = static_cast<std::size_t>(std::max_element(point_dist.begin(), point_dist.end()) - point_dist.begin());
            centroids.row(cc) = features.row(static_cast<Eigen::Index>(far));
            point_dist[far] = 0.0;
        }

        if (std::isfinite(previous) && std::abs(previous - objective) <= options.tolerance * std::max(previous, 1e-300)) {
            break;
        }
        previous = objective;
    }
    // final assignment against the final centroids
    for (std::size_t i = 0; i < n; ++i) {
        out.assignments[i] = nearest(features.row(static_cast<Eigen::Index>(i)).data(), centroids);
    }
    out.centroids = std::move(centroids);
    return out;
}

std::size_t assign_pseudo_label(std::span<const double> feature, const Matrix& centroids) {
    if (static_cast<Eigen::Index>(feature.size()) != centroids.cols()) {
        throw ShapeError("assign_pseudo_label: feature of dimension " + std::to_string(feature.size()) +
                         " vs centroids of dimension " + std::to_string(centroids.cols()));
    }
    return nearest(feature.data(), centroids);
}

Matrix cosine_matrix(const Matrix& centroids) {
    Eigen::VectorXd norms = centroids.rowwise().norm();
    for (Eigen::Index i = 0; i < norms.size(); ++i) {
        if (!(norms[i] > 0)) throw Error("cosine_matrix: centroid " + std::to_string(i) + " has zero norm");
    }
    Matrix unit = norms.cwiseInverse().asDiagonal() * centroids;
    Matrix w = unit * unit.transpose();
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        w(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < w.cols(); ++j) {
            double v = std::clamp(0.5 * (w(i, j) + w(j, i)), -1.0, 1.0);
            w(i, j) = w(j, i) = v;
        }
    }
    return w;
}

double center_objective(const Matrix& phi, const Matrix& similarity) {
    const double k = static_cast<double>(phi.cols());
    Matrix gram = phi * phi.transpose() - k * similarity;
    Eigen::RowVectorXd total = phi.colwise().sum();
    return gram.squaredNorm() + 0.5 * total.squaredNorm();
}

Matrix center_objective_gradient(const Matrix& phi, const Matrix& similarity) {
    const double k = static_cast<double>(phi.cols());
    Matrix gram = phi * phi.transpose() - k * similarity;
    Eigen::RowVectorXd total = phi.colwise().sum();
    Matrix grad = 4.0 * gram * phi;
    grad.rowwise() += total;
    return grad;
}

AdmmState initial_state(std::size_t centers, std::size_t bits, std::uint64_t seed, const AdmmOptions& options) {
    if (centers == 0 || bits == 0) throw Error("hash centers: need N_c >= 1 and K >= 1");
    auto rng = RngStreams(seed).stream("admm");
    AdmmState s;
    s.phi.resize(static_cast<Eigen::Index>(centers), static_cast<Eigen::Index>(bits));
    for (Eigen::Index i = 0; i < s.phi.size(); ++i) s.phi.data()[i] = uniform(rng, -1.0, 1.0);
    s.psi_box = s.phi;
    s.psi_sphere = s.phi;
    s.dual_box = Matrix::Zero(s.phi.rows(), s.phi.cols());
    s.dual_sphere = s.dual_box;
    s.mu_box = s.mu_sphere = options.mu_initial;
    s.eta = options.eta;
    return s;
}

void phi_update(AdmmState& state, const Matrix& similarity, const lbfgs::Options& options) {
    const Eigen::Index rows = state.phi.rows();
    const Eigen::Index cols = state.phi.cols();
    const double mu = state.mu_box + state.mu_sphere;
    const Matrix g_lin = state.dual_box + state.dual_sphere - state.mu_box * state.psi_box - state.mu_sphere * state.psi_sphere;

    auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        Eigen::Map<const Matrix> phi(x.data(), rows, cols);
        Matrix p = phi;
        double value = center_objective(p, similarity) + 0.5 * mu * p.squaredNorm() + (p.array() * g_lin.array()).sum();
        Matrix gm = center_objective_gradient(p, similarity) + mu * p + g_lin;
        grad = Eigen::Map<const Eigen::VectorXd>(gm.data(), gm.size());
        return value;
    };
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(state.phi.data(), state.phi.size());
    lbfgs::minimize(objective, x, options);
    state.phi = Eigen::Map<const Matrix>(x.data(), rows, cols);
}

Matrix box_project(const Matrix& v) { return v.cwiseMax(-1.0).cwiseMin(1.0); }

Matrix sphere_project(const Matrix& v) {
    double norm = v.norm();
    double radius = std::sqrt(static_cast<double>(v.size()));
    if (!(norm > 0)) return Matrix::Constant(v.rows(), v.cols(), 1.0);
    return (radius / norm) * v;
}

void psi_update(AdmmState& state) {
    state.psi_box = box_project(state.phi + state.dual_box / state.mu_box);
    state.psi_sphere = sphere_project(state.phi + state.dual_sphere / state.mu_sphere);
}

void dual_ascent(AdmmState& state) {
    state.dual_box += state.eta * state.mu_box * (state.phi - state.psi_box);
    state.dual_sphere += state.eta * state.mu_sphere * (state.phi - state.psi_sphere);
}

Matrix binarize(const Matrix& phi) { return phi.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; }); }

HashCenterResult generate_hash_centers(const Matrix& similarity, std::size_t bits, std::uint64_t seed,
                                       const AdmmOptions& options) {
    if (similarity.rows() != similarity.cols() || similarity.rows() == 0) {
        throw ShapeError("hash centers: similarity must be square and non-empty");
    }
    auto state = initial_state(static_cast<std::size_t>(similarity.rows()), bits, seed, options);

    HashCenterResult result;
    result.centers = binarize(state.phi);
    result.initial_objective = result.objective = center_objective(result.centers, similarity);

    for (std::size_t it = 1; it <= options.max_outer; ++it) {
        phi_update(state, similarity, options.inner);
        psi_update(state);
        dual_ascent(state);
        state.iteration = it;
        double rb = (state.phi - state.psi_box).lpNorm<Eigen::Infinity>();
        double rp = (state.phi - state.psi_sphere).lpNorm<Eigen::Infinity>();
        state.residual_box.push_back(rb);
        state.residual_sphere.push_back(rp);
        state.mu_box = std::min(state.mu_box * options.mu_growth, options.mu_max);
        state.mu_sphere = std::min(state.mu_sphere * options.mu_growth, options.mu_max);

        Matrix candidate = binarize(state.phi);
        double value = center_objective(candidate, similarity);
        result.objective_trace.push_back(value);
        if (value < result.objective) {
            result.objective = value;
            result.centers = std::move(candidate);
            result.best_iteration = it;
        }
        result.iterations = it;
        if (std::max(rb, rp) < options.tolerance) {
            result.converged = true;
            break;
        }
    }
    result.residual_box = std::move(state.residual_box);
    result.residual_sphere = std::move(state.residual_sphere);
    return result;
}

nlohmann::json report_json(const HashCenterResult& result, std::uint64_t seed) {
    return {{"seed", seed},
            {"iterations", result.iterations},
            {"best_iteration", result.best_iteration},
            {"converged", result.converged},
            {"warning", result.converged ? "" : "residual tolerance not reached; returning best binarized iterate"},
            {"objective", result.objective},
            {"initial_objective", result.initial_objective},
            {"objective_trace", result.objective_trace},
            {"residual_box_trace", result.residual_box},
            {"residual_sphere_trace", result.residual_sphere}};
}

}  // namespace s5vh::centers
