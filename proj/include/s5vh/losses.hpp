#pragma once

#include <vector>

#include "s5vh/tensor.hpp"

namespace s5vh::losses {

struct LossWeights {
    double alpha = 1.0;  // contrastive
    double beta = 1.0;   // center alignment
    double tau = 0.5;    // temperature of both softmax losses

    void validate() const;
};

/// Mean over masked rows of the squared L2 reconstruction error, averaged
/// over the batch.
///   recon, target: (B, T, D); masked[b]: masked time indices of video b.
Tensor temporal_reconstruction_loss(const Tensor& recon, const Tensor& target,
                                    const std::vector<std::vector<std::size_t>>& masked);

/// Symmetric two-view InfoNCE over video codes (B, K) with cos = b^T b' / K:
///   -log softmax_row(i, i) - log softmax_col(i, i), averaged over i.
Tensor contrastive_loss(const Tensor& codes_a, const Tensor& codes_b, double tau);

/// Softmax cross-entropy of each code against all centers (N_c, K) with
/// logits phi_c^T b / (K tau), targeting labels[b]; averaged over the batch.
Tensor center_alignment_loss(const Tensor& codes, const std::vector<std::size_t>& labels, const Tensor& centers,
                             double tau);

struct LossParts {
    Tensor reconstruction_a;
    Tensor reconstruction_b;
    Tensor contrastive;
    Tensor alignment_a;  // may be undefined when alignment is disabled
    Tensor alignment_b;
};

/// 1/2 (TR_a + TR_b) + alpha CL + beta/2 (CA_a + CA_b).
Tensor total_loss(const LossParts& parts, const LossWeights& weights);

}  // namespace s5vh::losses
