#include "s5vh/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace s5vh {

double grad_check(const ScalarFunction& f, std::vector<Tensor> inputs, double eps) {
    for (const auto& t : inputs) {
        if (t.dtype() != DType::F64 || !t.requires_grad()) {
            throw Error("grad_check: inputs must be F64 tensors with requires_grad");
        }
    }
    for (auto& t : inputs) t.zero_grad();

    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = f(inputs);
        if (!std::isfinite(loss.item())) throw Error("grad_check: non-finite loss");
        tape.backward(loss);
    }
    for (auto& t : inputs) {
        if (t.has_grad()) {
            analytic.emplace_back(t.grad().begin(), t.grad().end());
        } else {
            analytic.emplace_back(t.numel(), 0.0);
        }
        t.zero_grad();
    }

    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto values = inputs[k].mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            double saved = values[i];
            values[i] = saved + eps;
            double up = f(inputs).item();
            values[i] = saved - eps;
            double down = f(inputs).item();
            values[i] = saved;
            double numeric = (up - down) / (2.0 * eps);
            if (!std::isfinite(numeric) || !std::isfinite(analytic[k][i])) {
                throw Error("grad_check: non-finite gradient at input " + std::to_string(k) + " entry " +
                            std::to_string(i));
            }
            double err = std::abs(analytic[k][i] - numeric) / std::max(1.0, std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace s5vh
