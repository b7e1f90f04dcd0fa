#include "s5vh/bench.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "s5vh/ops.hpp"
#include "s5vh/rng.hpp"

namespace s5vh::bench {

Workload scan_encoder_workload(const S5vhModel& model) {
    return {"s5vh_scan_encoder", model.config().feature_dim,
            [&model](const Tensor& x) { (void)model.encode_batch(x); }};
}

PairwiseMixingLayer::PairwiseMixingLayer(std::size_t dim, std::uint64_t seed) {
    auto rng = RngStreams(seed).stream("bench.reference");
    proj_ = nn::Linear(dim, dim, true, DType::F32, rng);
}

Tensor PairwiseMixingLayer::forward(const Tensor& x) const {
    if (x.rank() != 3 || x.dim(2) != dim()) {
        throw ShapeError("pairwise mixing: expected (B, L, " + std::to_string(dim()) + "), got " + to_string(x.shape()));
    }
    const std::size_t nb = x.dim(0), nl = x.dim(1), nd = x.dim(2);
    Tensor h = proj_.forward(x);
    auto hd = h.data();
    std::vector<double> out(nb * nl * nd, 0.0);
    std::vector<double> weights(nl);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(nd));
    for (std::size_t b = 0; b < nb; ++b) {
        const double* hb = hd.data() + b * nl * nd;
        for (std::size_t i = 0; i < nl; ++i) {
            double mx = -INFINITY;
            for (std::size_t j = 0; j < nl; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < nd; ++k) s += hb[i * nd + k] * hb[j * nd + k];
                weights[j] = s * inv_sqrt;
                mx = std::max(mx, weights[j]);
            }
            double total = 0.0;
            for (auto& w : weights) {
                w = std::exp(w - mx);
                total += w;
            }
            double* o = out.data() + (b * nl + i) * nd;
            for (std::size_t j = 0; j < nl; ++j) {
                double w = weights[j] / total;
                for (std::size_t k = 0; k < nd; ++k) o[k] += w * hb[j * nd + k];
            }
        }
    }
    return Tensor::from(x.shape(), std::move(out), x.dtype());
}

Workload quadratic_reference_workload(std::size_t dim, std::uint64_t seed) {
    auto layer = std::make_shared<PairwiseMixingLayer>(dim, seed);
    return {"pairwise_quadratic_reference", dim, [layer](const Tensor& x) { (void)layer->forward(x); }};
}

Tensor make_input(const Workload& workload, std::size_t batch, std::size_t length, std::uint64_t seed) {
    auto rng = RngStreams(seed).stream("bench.input", length);
    std::vector<double> values(batch * length * workload.input_dim);
    for (auto& v : values) v = normal(rng);
    return Tensor::from({batch, length, workload.input_dim}, std::move(values), DType::F32);
}

std::int64_t activation_bytes(const Workload& workload, std::size_t batch, std::size_t length) {
    const std::int64_t baseline = MemoryTracker::live();
    MemoryTracker::reset_peak();
    {
        Tensor x = make_input(workload, batch, length);
        workload.run(x);
    }
    return MemoryTracker::peak() - baseline;
}

StressResult stress_batch(const Workload& workload, std::size_t length, const StressOptions& options) {
    if (options.step == 0) throw Error("stress_batch: step must be positive");
    StressResult result;
    auto fits = [&](std::size_t units) {
        return activation_bytes(workload, units * options.step, length) <= options.memory_budget_bytes;
    };
    const std::size_t max_units = options.batch_cap / options.step;
    if (max_units == 0 || !fits(1)) {
        result.warning = true;
        return result;
    }
    // doubling then bisection over multiples of `step`; memory is monotone in batch
    std::size_t good = 1;
    std::size_t bad = 0;
    while (bad == 0) {
        std::size_t next = std::min(good * 2, max_units);
        if (next == good) break;
        if (fits(next)) {
            good = next;
        } else {
            bad = next;
        }
    }
    if (bad == 0) {
        result.max_batch = good * options.step;
        result.capped = true;
        return result;
    }
    while (bad - good > 1) {
        std::size_t mid = good + (bad - good) / 2;
        if (fits(mid)) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    result.max_batch = good * options.step;
    return result;
}

double median(std::vector<double> values) {
    if (values.empty()) throw Error("median: no values");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Timing time_encode(const Workload& workload, std::size_t length, std::size_t batch, const TimingOptions& options) {
    if (batch == 0 || options.repeats == 0) throw Error("time_encode: batch and repeats must be positive");
    Tensor x = make_input(workload, batch, length);
    for (std::size_t i = 0; i < options.warmup; ++i) workload.run(x);
    Timing timing;
    for (std::size_t i = 0; i < options.repeats; ++i) {
        auto start = std::chrono::steady_clock::now();
        workload.run(x);
        auto stop = std::chrono::steady_clock::now();
        double ms = std::chrono::duration<double, std::milli>(stop - start).count();
        timing.samples_ms_per_sample.push_back(ms / static_cast<double>(batch));
    }
    timing.median_ms_per_sample = median(timing.samples_ms_per_sample);
    return timing;
}

double ScalingFit::quadratic_share(double length) const {
    double quad = a * length * length;
    return quad / (quad + b * length + c);
}

namespace {

double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& predicted) {
    double mean = y.mean();
    double ss_tot = (y.array() - mean).square().sum();
    double ss_res = (y - predicted).squaredNorm();
    if (ss_tot <= 0.0) return ss_res <= 0.0 ? 1.0 : 0.0;
    return std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
}

}  // namespace

ScalingFit fit_scaling(std::span<const std::pair<double, double>> points) {
    std::set<double> distinct;
    for (const auto& p : points) distinct.insert(p.first);
    if (distinct.size() < 4) throw Error("fit_scaling: need at least 4 distinct lengths");

    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double l = points[static_cast<std::size_t>(i)].first;
        design(i, 0) = l * l;
        design(i, 1) = l;
        design(i, 2) = 1.0;
        y(i) = points[static_cast<std::size_t>(i)].second;
    }
    ScalingFit fit;
    Eigen::VectorXd quad = design.colPivHouseholderQr().solve(y);
    fit.a = quad(0);
    fit.b = quad(1);
    fit.c = quad(2);
    fit.r2 = r_squared(y, design * quad);

    Eigen::MatrixXd linear_design = design.rightCols(2);
    Eigen::VectorXd lin = linear_design.colPivHouseholderQr().solve(y);
    fit.linear_slope = lin(0);
    fit.linear_intercept = lin(1);
    fit.linear_r2 = r_squared(y, linear_design * lin);
    return fit;
}

WorkloadReport run_bench(const Workload& workload, const BenchOptions& options) {
    WorkloadReport report;
    report.name = workload.name;
    std::vector<std::pair<double, double>> points;
    for (auto length : options.lengths) {
        LengthMeasurement m;
        m.length = length;
        m.batch = options.batch;
        if (options.probe_memory) m.stress = stress_batch(workload, length, options.stress);
        m.timing = time_encode(workload, length, options.batch, options.timing);
        points.emplace_back(static_cast<double>(length), m.timing.median_ms_per_sample);
        report.measurements.push_back(std::move(m));
    }
    report.fit = fit_scaling(points);
    return report;
}

nlohmann::json to_json(const WorkloadReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& m : report.measurements) {
        rows.push_back({{"length", m.length},
                        {"batch", m.batch},
                        {"median_ms_per_sample", m.timing.median_ms_per_sample},
                        {"raw_ms_per_sample", m.timing.samples_ms_per_sample},
                        {"max_batch", m.stress.max_batch},
                        {"max_batch_capped", m.stress.capped},
                        {"max_batch_warning", m.stress.warning}});
    }
    const auto& f = report.fit;
    double l_max = report.measurements.empty() ? 0.0 : static_cast<double>(report.measurements.back().length);
    return {{"workload", report.name},
            {"measurements", rows},
            {"quadratic_fit", {{"a", f.a}, {"b", f.b}, {"c", f.c}, {"r2", f.r2}}},
            {"linear_fit", {{"slope", f.linear_slope}, {"intercept", f.linear_intercept}, {"r2", f.linear_r2}}},
            {"quadratic_share_at_max_length", f.quadratic_share(l_max)}};
}

}  // namespace s5vh::bench
