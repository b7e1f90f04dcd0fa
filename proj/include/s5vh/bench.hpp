#pragma once

#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "s5vh/model.hpp"

namespace s5vh::bench {

/// An inference pass over a (batch, length, input_dim) input.
struct Workload {
    std::string name;
    std::size_t input_dim = 0;
    std::function<void(const Tensor&)> run;
};

/// Encoder + hash layer + pooling of `model`, which must outlive the workload.
Workload scan_encoder_workload(const S5vhModel& model);

/// Pairwise token mixing, y_i = sum_j softmax_j(x_i . x_j / sqrt(d)) x_j,
/// evaluated densely: O(L^2 d) per sample. Used only to exercise the fitter
/// on a genuinely quadratic workload.
class PairwiseMixingLayer {
public:
    PairwiseMixingLayer(std::size_t dim, std::uint64_t seed);
    Tensor forward(const Tensor& x) const;
    std::size_t dim() const { return proj_.in_features(); }

private:
    nn::Linear proj_;
};

Workload quadratic_reference_workload(std::size_t dim, std::uint64_t seed);

/// Deterministic input for a workload.
Tensor make_input(const Workload& workload, std::size_t batch, std::size_t length, std::uint64_t seed = 0);

/// Activation bytes of one pass: peak tracked tensor bytes above the live
/// baseline, input included.
std::int64_t activation_bytes(const Workload& workload, std::size_t batch, std::size_t length);

struct StressOptions {
    std::int64_t memory_budget_bytes = std::int64_t{1} << 30;
    std::size_t batch_cap = 1000;
    std::size_t step = 5;
};

struct StressResult {
    std::size_t max_batch = 0;  // largest multiple of `step` within budget, capped
    bool capped = false;
    bool warning = false;       // even one unit exceeds the budget
};

StressResult stress_batch(const Workload& workload, std::size_t length, const StressOptions& options);

struct TimingOptions {
    std::size_t warmup = 3;
    std::size_t repeats = 11;
};

struct Timing {
    double median_ms_per_sample = 0.0;
    std::vector<double> samples_ms_per_sample;
};

/// Median over repeats of wall time / batch on a monotonic clock; warmup
/// runs are discarded.
Timing time_encode(const Workload& workload, std::size_t length, std::size_t batch, const TimingOptions& options);

/// Median of a sample; the input is copied.
double median(std::vector<double> values);

struct ScalingFit {
    double a = 0.0;  // T = a L^2 + b L + c
    double b = 0.0;
    double c = 0.0;
    double r2 = 0.0;
    double linear_slope = 0.0;  // T = slope L + intercept
    double linear_intercept = 0.0;
    double linear_r2 = 0.0;

    /// a L^2 / (a L^2 + b L + c).
    double quadratic_share(double length) const;
};

/// Least-squares quadratic and linear fits (Householder QR). Needs at least
/// four distinct lengths.
ScalingFit fit_scaling(std::span<const std::pair<double, double>> points);

struct LengthMeasurement {
    std::size_t length = 0;
    std::size_t batch = 0;
    Timing timing;
    StressResult stress;
};

struct WorkloadReport {
    std::string name;
    std::vector<LengthMeasurement> measurements;
    ScalingFit fit;
};

struct BenchOptions {
    std::vector<std::size_t> lengths{32, 64, 128, 256, 512, 1024};
    std::size_t batch = 5;
    TimingOptions timing;
    StressOptions stress;
    bool probe_memory = true;
};

WorkloadReport run_bench(const Workload& workload, const BenchOptions& options);

nlohmann::json to_json(const WorkloadReport& report);

}  // namespace s5vh::bench
