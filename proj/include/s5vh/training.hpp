#pragma once

#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <random>
#include <utility>
#include <vector>

#include "s5vh/data.hpp"
#include "s5vh/losses.hpp"
#include "s5vh/model.hpp"

namespace s5vh::training {

/// One augmented view: frames in `masked` are dropped, `visible` keeps the
/// remaining indices in temporal order.
struct MaskedView {
    std::vector<std::size_t> visible;
    std::vector<std::size_t> masked;
    int view = 1;
};

/// round(ratio * frames); throws unless the result lies in [1, frames - 1].
std::size_t masked_count(std::size_t frames, double ratio);

/// Two independent uniform masks of masked_count(frames, ratio) frames.
std::pair<MaskedView, MaskedView> make_views(std::size_t frames, double ratio, std::mt19937_64& rng);

/// Cosine annealing from lr_max at epoch 0 to lr_min at epoch max_epochs-1.
double step_schedule(std::size_t epoch, std::size_t max_epochs, double lr_max, double lr_min);

struct TrainConfig {
    ModelConfig model;
    std::size_t n_centers = 100;
    double mask_ratio = 0.5;
    losses::LossWeights weights;
    std::size_t batch_size = 128;
    std::size_t max_epochs = 350;
    std::size_t patience = 5;
    double min_delta = 1e-4;  // early-stopping improvement threshold on the epoch-mean total loss
    double lr_max = 5e-4;
    double lr_min = 1e-5;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;
    bool strict = true;  // single-threaded, bit-reproducible
    bool center_alignment = true;

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Decoupled-weight-decay Adam over a parameter list.
class AdamW {
public:
    AdamW(nn::ParameterList params, double beta1, double beta2, double eps, double weight_decay);

    void step(double lr);
    void zero_grad();

private:
    nn::ParameterList params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    double beta1_, beta2_, eps_, weight_decay_;
    std::size_t t_ = 0;
};

struct CenterTargets {
    Tensor centers;                          // (N_c, K), entries +-1
    std::vector<std::size_t> pseudo_labels;  // one per training video
};

struct StepLog {
    std::size_t epoch;
    std::size_t step;
    double reconstruction;
    double contrastive;
    double alignment;
    double total;
    double lr;
};

struct EpochSummary {
    std::size_t epoch;
    double mean_total;
    double lr;
    bool improved;
};

struct TrainResult {
    S5vhModel model;  // parameters of the best epoch
    std::vector<StepLog> steps;
    std::vector<EpochSummary> epochs;
    std::size_t best_epoch = 0;
    bool early_stopped = false;
};

/// Raised when a step produces a non-finite loss.
class NonFiniteLossError : public Error {
public:
    NonFiniteLossError(const std::string& what, nlohmann::json diagnostic)
        : Error(what), diagnostic(std::move(diagnostic)) {}
    nlohmann::json diagnostic;
};

/// Called after every epoch with the live (not best) model.
using EpochCallback = std::function<void(const EpochSummary&, const S5vhModel&)>;

TrainResult train(const data::Dataset& dataset, const CenterTargets& targets, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// CSV columns: epoch,step,L_TR,L_CL,L_CA,total,lr.
void write_train_log(const std::filesystem::path& path, const std::vector<StepLog>& steps);

/// The resolved configuration plus the early-stopping rule actually used.
nlohmann::json resolved_config(const TrainConfig& config);

}  // namespace s5vh::training
