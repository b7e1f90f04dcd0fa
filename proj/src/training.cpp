#include "s5vh/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "s5vh/io.hpp"
#include "s5vh/ops.hpp"
#include "s5vh/rng.hpp"

namespace s5vh::training {

std::size_t masked_count(std::size_t frames, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw Error("mask ratio must lie in (0, 1)");
    auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(frames)));
    if (frames < 2 || count < 1 || count > frames - 1) {
        throw Error("mask ratio " + std::to_string(ratio) + " is infeasible for " + std::to_string(frames) +
                    " frames (masked count " + std::to_string(count) + ")");
    }
    return count;
}

namespace {

MaskedView sample_view(std::size_t frames, std::size_t count, int id, std::mt19937_64& rng) {
    std::vector<std::size_t> order(frames);
    for (std::size_t i = 0; i < frames; ++i) order[i] = i;
    // partial Fisher-Yates: the first `count` entries form the mask
    for (std::size_t i = 0; i < count; ++i) std::swap(order[i], order[i + uniform_index(rng, frames - i)]);
    MaskedView v;
    v.view = id;
    v.masked.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(v.masked.begin(), v.masked.end());
    std::vector<bool> is_masked(frames, false);
    for (auto m : v.masked) is_masked[m] = true;
    for (std::size_t t = 0; t < frames; ++t)
        if (!is_masked[t]) v.visible.push_back(t);
    return v;
}

}  // namespace

std::pair<MaskedView, MaskedView> make_views(std::size_t frames, double ratio, std::mt19937_64& rng) {
    auto count = masked_count(frames, ratio);
    auto first = sample_view(frames, count, 1, rng);
    auto second = sample_view(frames, count, 2, rng);
    return {std::move(first), std::move(second)};
}

double step_schedule(std::size_t epoch, std::size_t max_epochs, double lr_max, double lr_min) {
    if (max_epochs == 0 || epoch >= max_epochs) throw Error("step_schedule: epoch out of range");
    if (max_epochs == 1) return lr_max;
    double progress = static_cast<double>(epoch) / static_cast<double>(max_epochs - 1);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

void TrainConfig::validate() const {
    model.validate();
    weights.validate();
    if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw Error("train config: mask_ratio must lie in (0, 1)");
    if (!(lr_max > lr_min && lr_min > 0.0)) throw Error("train config: need lr_max > lr_min > 0");
    if (patience < 1) throw Error("train config: patience must be >= 1");
    if (batch_size < 1 || max_epochs < 1) throw Error("train config: batch_size and max_epochs must be >= 1");
    if (n_centers < 1) throw Error("train config: n_centers must be >= 1");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"model", c.model},
         {"n_centers", c.n_centers},
         {"mask_ratio", c.mask_ratio},
         {"tau", c.weights.tau},
         {"alpha", c.weights.alpha},
         {"beta", c.weights.beta},
         {"batch_size", c.batch_size},
         {"max_epochs", c.max_epochs},
         {"patience", c.patience},
         {"min_delta", c.min_delta},
         {"lr_max", c.lr_max},
         {"lr_min", c.lr_min},
         {"adam_beta1", c.adam_beta1},
         {"adam_beta2", c.adam_beta2},
         {"adam_eps", c.adam_eps},
         {"weight_decay", c.weight_decay},
         {"seed", c.seed},
         {"strict", c.strict},
         {"center_alignment", c.center_alignment}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    nlohmann::json known;
    to_json(known, TrainConfig{});
    for (const auto& [key, value] : j.items())
        // config_resolved.json adds descriptive keys; accept it back as input
        if (!known.contains(key) && key != "early_stopping" && key != "masked_frames_rule")
            throw Error("train config: unknown key '" + key + "'");
    TrainConfig d;
    c.model = j.value("model", d.model);
    c.n_centers = j.value("n_centers", d.n_centers);
    c.mask_ratio = j.value("mask_ratio", d.mask_ratio);
    c.weights.tau = j.value("tau", d.weights.tau);
    c.weights.alpha = j.value("alpha", d.weights.alpha);
    c.weights.beta = j.value("beta", d.weights.beta);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.max_epochs = j.value("max_epochs", d.max_epochs);
    c.patience = j.value("patience", d.patience);
    c.min_delta = j.value("min_delta", d.min_delta);
    c.lr_max = j.value("lr_max", d.lr_max);
    c.lr_min = j.value("lr_min", d.lr_min);
    c.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
    c.adam_eps = j.value("adam_eps", d.adam_eps);
    c.weight_decay = j.value("weight_decay", d.weight_decay);
    c.seed = j.value("seed", d.seed);
    c.strict = j.value("strict", d.strict);
    c.center_alignment = j.value("center_alignment", d.center_alignment);
}

AdamW::AdamW(nn::ParameterList params, double beta1, double beta2, double eps, double weight_decay)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {
    for (const auto& [name, p] : params_) {
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void AdamW::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = params_[k].second;
        if (!p.has_grad()) continue;
        auto w = p.mutable_data();
        auto g = p.grad();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            w[i] -= lr * weight_decay_ * w[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
        }
        p.round_to_dtype();
    }
}

void AdamW::zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
}

namespace {

struct BatchInputs {
    Tensor visible;   // (2B, T_v, D): view 1 rows then view 2 rows
    Tensor target;    // (2B, T, D)
    std::vector<std::vector<std::size_t>> visible_index;
    std::vector<std::vector<std::size_t>> masked_index;
    std::vector<std::size_t> labels;  // (B)
};

BatchInputs assemble(const data::Dataset& dataset, const CenterTargets& targets, std::span<const std::size_t> videos,
                     double mask_ratio, std::mt19937_64& rng, DType dtype) {
    const std::size_t nb = videos.size();
    const std::size_t nt = dataset.n_frames;
    const std::size_t nd = dataset.dim;
    BatchInputs in;
    in.visible_index.resize(2 * nb);
    in.masked_index.resize(2 * nb);
    for (std::size_t i = 0; i < nb; ++i) {
        auto [a, b] = make_views(nt, mask_ratio, rng);
        in.visible_index[i] = std::move(a.visible);
        in.masked_index[i] = std::move(a.masked);
        in.visible_index[nb + i] = std::move(b.visible);
        in.masked_index[nb + i] = std::move(b.masked);
        if (!targets.pseudo_labels.empty()) in.labels.push_back(targets.pseudo_labels[videos[i]]);
    }
    const std::size_t nv = in.visible_index.front().size();
    std::vector<double> visible(2 * nb * nv * nd);
    std::vector<double> target(2 * nb * nt * nd);
    for (std::size_t r = 0; r < 2 * nb; ++r) {
        const auto& frames = dataset.frames[videos[r % nb]];
        std::copy(frames.begin(), frames.end(), target.begin() + static_cast<std::ptrdiff_t>(r * nt * nd));
        for (std::size_t j = 0; j < nv; ++j) {
            auto src = frames.begin() + static_cast<std::ptrdiff_t>(in.visible_index[r][j] * nd);
            std::copy(src, src + static_cast<std::ptrdiff_t>(nd),
                      visible.begin() + static_cast<std::ptrdiff_t>((r * nv + j) * nd));
        }
    }
    in.visible = Tensor::from({2 * nb, nv, nd}, std::move(visible), dtype);
    in.target = Tensor::from({2 * nb, nt, nd}, std::move(target), dtype);
    return in;
}

std::vector<std::vector<std::size_t>> rows(const std::vector<std::vector<std::size_t>>& index, std::size_t start,
                                           std::size_t count) {
    return {index.begin() + static_cast<std::ptrdiff_t>(start),
            index.begin() + static_cast<std::ptrdiff_t>(start + count)};
}

}  // namespace

TrainResult train(const data::Dataset& dataset, const CenterTargets& targets, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    config.validate();
    if (dataset.size() == 0) throw Error("train: empty dataset");
    if (dataset.dim != config.model.feature_dim) {
        throw ShapeError("train: dataset feature dim " + std::to_string(dataset.dim) + " vs model feature_dim " +
                         std::to_string(config.model.feature_dim));
    }
    if (config.center_alignment) {
        if (targets.pseudo_labels.size() != dataset.size()) throw Error("train: pseudo labels do not match dataset size");
        if (!targets.centers.defined() || targets.centers.rank() != 2 ||
            targets.centers.dim(1) != config.model.code_bits) {
            throw ShapeError("train: hash centers must be (N_c, " + std::to_string(config.model.code_bits) + ")");
        }
    }
    masked_count(dataset.n_frames, config.mask_ratio);

    const DType dtype = DType::F32;
    RngStreams streams(config.seed);
    TrainResult result;
    result.model = S5vhModel(config.model, dtype, streams.derive("model"));
    S5vhModel& model = result.model;
    auto params = model.parameters();
    AdamW optimizer(params, config.adam_beta1, config.adam_beta2, config.adam_eps, config.weight_decay);
    Tensor centers = targets.centers.defined() ? targets.centers.to(dtype) : Tensor();

    std::vector<std::vector<double>> best_params;
    double best_loss = INFINITY;
    std::size_t stale = 0;
    std::vector<std::size_t> order(dataset.size());

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        const double lr = step_schedule(epoch, config.max_epochs, config.lr_max, config.lr_min);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        auto shuffle_rng = streams.stream("shuffle", epoch);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);
        auto mask_rng = streams.stream("masks", epoch);

        double epoch_total = 0.0;
        std::size_t epoch_steps = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t nb = std::min(config.batch_size, order.size() - start);
            std::span<const std::size_t> videos(order.data() + start, nb);
            auto in = assemble(dataset, targets, videos, config.mask_ratio, mask_rng, dtype);

            Tape tape;
            TapeScope scope(tape);
            Tensor h = model.frame_hash(in.visible);
            Tensor codes = hashing::video_hash(h);
            Tensor recon = model.reconstruct(h, in.visible_index, dataset.n_frames);

            losses::LossParts parts;
            parts.reconstruction_a = losses::temporal_reconstruction_loss(
                ops::slice(recon, 0, 0, nb), ops::slice(in.target, 0, 0, nb), rows(in.masked_index, 0, nb));
            parts.reconstruction_b = losses::temporal_reconstruction_loss(
                ops::slice(recon, 0, nb, nb), ops::slice(in.target, 0, nb, nb), rows(in.masked_index, nb, nb));
            Tensor codes_a = ops::slice(codes, 0, 0, nb);
            Tensor codes_b = ops::slice(codes, 0, nb, nb);
            parts.contrastive = losses::contrastive_loss(codes_a, codes_b, config.weights.tau);
            if (config.center_alignment) {
                parts.alignment_a = losses::center_alignment_loss(codes_a, in.labels, centers, config.weights.tau);
                parts.alignment_b = losses::center_alignment_loss(codes_b, in.labels, centers, config.weights.tau);
            }

            const double tr = 0.5 * (parts.reconstruction_a.item() + parts.reconstruction_b.item());
            const double cl = parts.contrastive.item();
            const double ca = config.center_alignment ? 0.5 * (parts.alignment_a.item() + parts.alignment_b.item()) : 0.0;
            if (!std::isfinite(tr) || !std::isfinite(cl) || !std::isfinite(ca)) {
                nlohmann::json dump = {{"epoch", epoch}, {"batch", start / config.batch_size},
                                       {"L_TR", tr}, {"L_CL", cl}, {"L_CA", ca}};
                for (auto v : videos) dump["videos"].push_back(dataset.ids[v]);
                throw NonFiniteLossError("train: non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                                             std::to_string(start / config.batch_size),
                                         dump);
            }
            Tensor total = losses::total_loss(parts, config.weights);

            optimizer.zero_grad();
            tape.backward(total);
            optimizer.step(lr);

            result.steps.push_back({epoch, epoch_steps, tr, cl, ca, total.item(), lr});
            epoch_total += total.item();
            ++epoch_steps;
        }

        EpochSummary summary{epoch, epoch_total / static_cast<double>(epoch_steps), lr, false};
        if (summary.mean_total < best_loss - config.min_delta) {
            summary.improved = true;
            best_loss = summary.mean_total;
            result.best_epoch = epoch;
            stale = 0;
            best_params.clear();
            for (const auto& [name, p] : params) best_params.emplace_back(p.data().begin(), p.data().end());
        } else {
            ++stale;
        }
        result.epochs.push_back(summary);
        if (on_epoch) on_epoch(summary, model);
        if (stale >= config.patience) {
            result.early_stopped = true;
            break;
        }
    }
    optimizer.zero_grad();
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor p = params[k].second;
        std::copy(best_params[k].begin(), best_params[k].end(), p.mutable_data().begin());
    }
    return result;
}

void write_train_log(const std::filesystem::path& path, const std::vector<StepLog>& steps) {
    std::ofstream os(path);
    if (!os) throw io::IoError("cannot open " + path.string() + " for writing");
    os << "epoch,step,L_TR,L_CL,L_CA,total,lr\n";
    char line[256];
    for (const auto& s : steps) {
        std::snprintf(line, sizeof line, "%zu,%zu,%.9g,%.9g,%.9g,%.9g,%.9g\n", s.epoch, s.step, s.reconstruction,
                      s.contrastive, s.alignment, s.total, s.lr);
        os << line;
    }
}

nlohmann::json resolved_config(const TrainConfig& config) {
    nlohmann::json j = config;
    j["early_stopping"] = {{"monitor", "epoch_mean_total_loss"},
                           {"min_delta", config.min_delta},
                           {"patience", config.patience},
                           {"restores", "best_epoch"}};
    j["masked_frames_rule"] = "round(mask_ratio * n_frames)";
    return j;
}

}  // namespace s5vh::training
