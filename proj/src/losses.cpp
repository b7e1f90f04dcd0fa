#include "s5vh/losses.hpp"

#include <cmath>

#include "s5vh/ops.hpp"

namespace s5vh::losses {

void LossWeights::validate() const {
    if (!(alpha > 0 && beta > 0 && tau > 0)) throw Error("loss weights: alpha, beta and tau must be positive");
}

Tensor temporal_reconstruction_loss(const Tensor& recon, const Tensor& target,
                                    const std::vector<std::vector<std::size_t>>& masked) {
    if (recon.shape() != target.shape() || recon.rank() != 3) {
        throw ShapeError("temporal_reconstruction_loss: reconstruction " + to_string(recon.shape()) + " vs target " +
                         to_string(target.shape()));
    }
    if (masked.empty() || masked.front().empty()) throw Error("temporal_reconstruction_loss: empty mask set");
    Tensor diff = ops::sub(ops::gather_rows(recon, masked), ops::gather_rows(target, masked));
    // (B, |M|, D) -> per-row squared norm -> mean over rows and batch
    return ops::mean_all(ops::sum(ops::square(diff), 2));
}

Tensor contrastive_loss(const Tensor& codes_a, const Tensor& codes_b, double tau) {
    if (codes_a.rank() != 2 || codes_a.shape() != codes_b.shape() || codes_a.dim(0) == 0) {
        throw ShapeError("contrastive_loss: codes " + to_string(codes_a.shape()) + " vs " + to_string(codes_b.shape()));
    }
    if (!(tau > 0)) throw Error("contrastive_loss: tau must be positive");
    const double k = static_cast<double>(codes_a.dim(1));
    Tensor logits = ops::scale(ops::matmul(codes_a, ops::transpose(codes_b)), 1.0 / (k * tau));
    Tensor positive = ops::diagonal(logits);
    Tensor row_term = ops::sub(ops::log_sum_exp(logits, 1), positive);
    Tensor col_term = ops::sub(ops::log_sum_exp(logits, 0), positive);
    return ops::mean_all(ops::add(row_term, col_term));
}

Tensor center_alignment_loss(const Tensor& codes, const std::vector<std::size_t>& labels, const Tensor& centers,
                             double tau) {
    if (codes.rank() != 2 || centers.rank() != 2 || codes.dim(1) != centers.dim(1)) {
        throw ShapeError("center_alignment_loss: codes " + to_string(codes.shape()) + " vs centers " +
                         to_string(centers.shape()));
    }
    if (labels.size() != codes.dim(0)) throw ShapeError("center_alignment_loss: label count mismatch");
    for (auto c : labels) {
        if (c >= centers.dim(0)) {
            throw Error("center_alignment_loss: pseudo label " + std::to_string(c) + " out of range for " +
                        std::to_string(centers.dim(0)) + " centers");
        }
    }
    if (!(tau > 0)) throw Error("center_alignment_loss: tau must be positive");
    const double k = static_cast<double>(codes.dim(1));
    Tensor logits = ops::scale(ops::matmul(codes, ops::transpose(centers)), 1.0 / (k * tau));
    return ops::mean_all(ops::sub(ops::log_sum_exp(logits, 1), ops::pick(logits, labels)));
}

Tensor total_loss(const LossParts& parts, const LossWeights& weights) {
    for (const Tensor* t : {&parts.reconstruction_a, &parts.reconstruction_b, &parts.contrastive}) {
        if (!t->defined() || !std::isfinite(t->item())) throw Error("total_loss: non-finite or missing component");
    }
    Tensor total = ops::add(ops::scale(ops::add(parts.reconstruction_a, parts.reconstruction_b), 0.5),
                            ops::scale(parts.contrastive, weights.alpha));
    if (parts.alignment_a.defined() && parts.alignment_b.defined()) {
        if (!std::isfinite(parts.alignment_a.item()) || !std::isfinite(parts.alignment_b.item())) {
            throw Error("total_loss: non-finite alignment component");
        }
        total = ops::add(total, ops::scale(ops::add(parts.alignment_a, parts.alignment_b), 0.5 * weights.beta));
    }
    return total;
}

}  // namespace s5vh::losses
