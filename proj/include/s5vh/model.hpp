#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <vector>

#include "s5vh/hashing.hpp"
#include "s5vh/ssm.hpp"

namespace s5vh {

struct ModelConfig {
    std::size_t feature_dim = 4096;  // D
    std::size_t code_bits = 16;      // K
    std::size_t encoder_dim = 256;
    std::size_t decoder_dim = 192;
    std::size_t encoder_layers = 6;
    std::size_t decoder_layers = 1;
    bool residual = true;
    ssm::MambaConfig mamba;

    void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Temporal encoder, hash layer and the training-only decoder + mask token.
class S5vhModel {
public:
    S5vhModel() = default;
    S5vhModel(const ModelConfig& config, DType dtype, std::uint64_t seed);

    /// Visible frames (B, T_v, D) -> soft frame codes (B, T_v, K).
    Tensor frame_hash(const Tensor& visible_frames) const;
    /// Places frame codes at their visible positions, fills the remaining
    /// positions with the mask token and decodes to (B, T, D).
    Tensor reconstruct(const Tensor& frame_codes, const std::vector<std::vector<std::size_t>>& visible,
                       std::size_t frames) const;

    /// Inference: one video's frames (T, D) -> binary code. No tape.
    hashing::HashCode encode(const Tensor& frames) const;
    /// Inference over a batch (B, T, D) -> B codes.
    std::vector<hashing::HashCode> encode_batch(const Tensor& frames) const;

    /// `inference_only` omits the decoder and mask token.
    nn::ParameterList parameters(bool inference_only = false) const;

    const ModelConfig& config() const { return config_; }
    DType dtype() const { return dtype_; }

    ssm::TemporalStack encoder;
    hashing::HashLayer hash_layer;
    ssm::TemporalStack decoder;
    Tensor mask_token;  // (K)

private:
    ModelConfig config_;
    DType dtype_ = DType::F32;
};

}  // namespace s5vh
