#pragma once

#include <Eigen/Core>
#include <functional>

namespace s5vh::lbfgs {

struct Options {
    int memory = 10;
    int max_iterations = 20;
    double grad_tolerance = 1e-5;  // stop when ||g||_inf < tol
    int max_line_search = 40;
    double armijo = 1e-4;
};

struct Result {
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// f(x, grad) returns the objective and writes the gradient.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Limited-memory BFGS with backtracking Armijo line search. Curvature
/// pairs with s^T y <= 0 are skipped. Minimizes in place.
Result minimize(const Objective& f, Eigen::VectorXd& x, const Options& options = {});

}  // namespace s5vh::lbfgs
