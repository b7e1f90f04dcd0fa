#include "s5vh/model.hpp"

#include "s5vh/ops.hpp"
#include "s5vh/rng.hpp"

namespace s5vh {

void ModelConfig::validate() const {
    if (feature_dim == 0 || code_bits == 0 || encoder_dim == 0 || decoder_dim == 0) {
        throw Error("model config: dimensions must be positive");
    }
    if (encoder_layers == 0) throw Error("model config: encoder needs at least one layer");
    if (mamba.state_size == 0 || mamba.conv_width == 0 || mamba.expand == 0) {
        throw Error("model config: state_size, conv_width and expand must be positive");
    }
    if (!(mamba.dt_min > 0 && mamba.dt_max >= mamba.dt_min)) throw Error("model config: need 0 < dt_min <= dt_max");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = {{"feature_dim", c.feature_dim},
         {"code_bits", c.code_bits},
         {"encoder_dim", c.encoder_dim},
         {"decoder_dim", c.decoder_dim},
         {"encoder_layers", c.encoder_layers},
         {"decoder_layers", c.decoder_layers},
         {"residual", c.residual},
         {"state_size", c.mamba.state_size},
         {"conv_width", c.mamba.conv_width},
         {"expand", c.mamba.expand},
         {"dt_rank", c.mamba.dt_rank},
         {"dt_min", c.mamba.dt_min},
         {"dt_max", c.mamba.dt_max}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    nlohmann::json known;
    to_json(known, ModelConfig{});
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) throw Error("model config: unknown key '" + key + "'");
    ModelConfig d;
    c.feature_dim = j.value("feature_dim", d.feature_dim);
    c.code_bits = j.value("code_bits", d.code_bits);
    c.encoder_dim = j.value("encoder_dim", d.encoder_dim);
    c.decoder_dim = j.value("decoder_dim", d.decoder_dim);
    c.encoder_layers = j.value("encoder_layers", d.encoder_layers);
    c.decoder_layers = j.value("decoder_layers", d.decoder_layers);
    c.residual = j.value("residual", d.residual);
    c.mamba.state_size = j.value("state_size", d.mamba.state_size);
    c.mamba.conv_width = j.value("conv_width", d.mamba.conv_width);
    c.mamba.expand = j.value("expand", d.mamba.expand);
    c.mamba.dt_rank = j.value("dt_rank", d.mamba.dt_rank);
    c.mamba.dt_min = j.value("dt_min", d.mamba.dt_min);
    c.mamba.dt_max = j.value("dt_max", d.mamba.dt_max);
}

S5vhModel::S5vhModel(const ModelConfig& config, DType dtype, std::uint64_t seed) : config_(config), dtype_(dtype) {
    config.validate();
    RngStreams streams(seed);
    auto enc_rng = streams.stream("init.encoder");
    auto hash_rng = streams.stream("init.hash");
    auto dec_rng = streams.stream("init.decoder");
    encoder = ssm::TemporalStack(config.feature_dim, config.encoder_dim, config.encoder_layers, 0, config.mamba,
                                 config.residual, dtype, enc_rng);
    hash_layer = hashing::HashLayer(config.encoder_dim, config.code_bits, dtype, hash_rng);
    decoder = ssm::TemporalStack(config.code_bits, config.decoder_dim, config.decoder_layers, config.feature_dim,
                                 config.mamba, config.residual, dtype, dec_rng);
    std::vector<double> token(config.code_bits);
    for (auto& v : token) v = 0.02 * normal(dec_rng);
    mask_token = nn::parameter({config.code_bits}, std::move(token), dtype);
}

Tensor S5vhModel::frame_hash(const Tensor& visible_frames) const {
    if (visible_frames.rank() != 3 || visible_frames.dim(2) != config_.feature_dim) {
        throw ShapeError("encoder: expected (B, T, " + std::to_string(config_.feature_dim) + "), got " +
                         to_string(visible_frames.shape()));
    }
    return hash_layer.forward(encoder.forward(visible_frames));
}

Tensor S5vhModel::reconstruct(const Tensor& frame_codes, const std::vector<std::vector<std::size_t>>& visible,
                              std::size_t frames) const {
    if (frame_codes.rank() != 3 || frame_codes.dim(2) != config_.code_bits) {
        throw ShapeError("decoder: expected (B, T, " + std::to_string(config_.code_bits) + "), got " +
                         to_string(frame_codes.shape()));
    }
    const std::size_t nb = frame_codes.dim(0);
    const std::size_t k = config_.code_bits;
    std::vector<double> masked(nb * frames * k, 1.0);
    for (std::size_t b = 0; b < visible.size(); ++b)
        for (auto t : visible[b])
            for (std::size_t j = 0; j < k; ++j) masked[(b * frames + t) * k + j] = 0.0;
    Tensor indicator = Tensor::from({nb, frames, k}, std::move(masked), dtype_);
    Tensor filled = ops::add(ops::scatter_rows(frame_codes, visible, frames), ops::mul(indicator, mask_token));
    return decoder.forward(filled);
}

std::vector<hashing::HashCode> S5vhModel::encode_batch(const Tensor& frames) const {
    Tensor h = frame_hash(frames);
    const std::size_t nb = h.dim(0), nt = h.dim(1), k = h.dim(2);
    std::vector<hashing::HashCode> out;
    out.reserve(nb);
    for (std::size_t b = 0; b < nb; ++b) out.push_back(hashing::pool_codes(h.data().subspan(b * nt * k, nt * k), nt, k));
    return out;
}

hashing::HashCode S5vhModel::encode(const Tensor& frames) const {
    if (frames.rank() != 2) throw ShapeError("encode: expected (T, D), got " + to_string(frames.shape()));
    Tensor batch = Tensor::from({1, frames.dim(0), frames.dim(1)}, {frames.data().begin(), frames.data().end()}, dtype_);
    return encode_batch(batch).front();
}

nn::ParameterList S5vhModel::parameters(bool inference_only) const {
    nn::ParameterList out;
    encoder.collect("encoder", out);
    hash_layer.collect("hash", out);
    if (!inference_only) {
        decoder.collect("decoder", out);
        out.emplace_back("mask_token", mask_token);
    }
    return out;
}

}  // namespace s5vh
