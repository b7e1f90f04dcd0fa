#include "s5vh/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <vector>

namespace s5vh::lbfgs {

Result minimize(const Objective& f, Eigen::VectorXd& x, const Options& options) {
    struct Pair {
        Eigen::VectorXd s;
        Eigen::VectorXd y;
        double rho;
    };
    std::deque<Pair> history;

    Eigen::VectorXd g(x.size());
    double fx = f(x, g);
    Result result;
    result.value = fx;

    Eigen::VectorXd direction(x.size());
    Eigen::VectorXd x_new(x.size());
    Eigen::VectorXd g_new(x.size());
    std::vector<double> alpha(static_cast<std::size_t>(options.memory));

    for (int it = 0; it < options.max_iterations; ++it) {
        if (g.lpNorm<Eigen::Infinity>() < options.grad_tolerance) {
            result.converged = true;
            break;
        }
        // two-loop recursion
        direction = -g;
        for (std::size_t i = history.size(); i-- > 0;) {
            alpha[i] = history[i].rho * history[i].s.dot(direction);
            direction -= alpha[i] * history[i].y;
        }
        if (!history.empty()) {
            const auto& last = history.back();
            direction *= last.s.dot(last.y) / last.y.squaredNorm();
        } else {
            double gn = g.norm();
            if (gn > 0) direction /= std::max(1.0, gn);
        }
        for (std::size_t i = 0; i < history.size(); ++i) {
            double beta = history[i].rho * history[i].y.dot(direction);
            direction += (alpha[i] - beta) * history[i].s;
        }

        double slope = g.dot(direction);
        if (slope >= 0) {
            // not a descent direction: restart from steepest descent
            history.clear();
            direction = -g / std::max(1.0, g.norm());
            slope = g.dot(direction);
        }

        double step = 1.0;
        double f_new = fx;
        bool accepted = false;
        for (int ls = 0; ls < options.max_line_search; ++ls) {
            x_new = x + step * direction;
            f_new = f(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= fx + options.armijo * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        result.iterations = it + 1;
        if (!accepted) break;

        Eigen::VectorXd s = x_new - x;
        Eigen::VectorXd y = g_new - g;
        double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            history.push_back({std::move(s), std::move(y), 1.0 / sy});
            if (static_cast<int>(history.size()) > options.memory) history.pop_front();
        }
        x = x_new;
        g = g_new;
        fx = f_new;
    }
    if (g.lpNorm<Eigen::Infinity>() < options.grad_tolerance) result.converged = true;
    result.value = fx;
    return result;
}

}  // namespace s5vh::lbfgs
