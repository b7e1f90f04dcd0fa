#include "s5vh/retrieval.hpp"

#include <bit>
#include <cmath>

#include "s5vh/tensor.hpp"

namespace s5vh::retrieval {

namespace {

void check_bits(const char* op, std::size_t a, std::size_t b) {
    if (a != b) throw ShapeError(std::string(op) + ": code lengths differ (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
}

void check_labels(const char* op, std::size_t codes, std::size_t labels) {
    if (codes != labels) {
        throw ShapeError(std::string(op) + ": " + std::to_string(labels) + " labels for " + std::to_string(codes) + " codes");
    }
}

}  // namespace

std::size_t hamming_distance(std::span<const std::int8_t> a, std::span<const std::int8_t> b) {
    check_bits("hamming_distance", a.size(), b.size());
    long dot = 0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return static_cast<std::size_t>((static_cast<long>(a.size()) - dot) / 2);
}

std::size_t hamming_distance_packed(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    check_bits("hamming_distance", a.size(), b.size());
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(a[i] ^ b[i])));
    return d;
}

std::vector<std::size_t> rank(std::span<const std::uint8_t> query, const hashing::PackedCodes& database) {
    if (database.empty()) throw Error("rank: empty database");
    check_bits("rank", query.size(), database.stride());
    // counting sort on distance keeps index order within each distance
    const std::size_t k = database.bits();
    std::vector<std::size_t> distance(database.size());
    std::vector<std::size_t> offsets(k + 2, 0);
    for (std::size_t i = 0; i < database.size(); ++i) {
        distance[i] = hamming_distance_packed(query, database.row(i));
        ++offsets[distance[i] + 1];
    }
    for (std::size_t r = 1; r < offsets.size(); ++r) offsets[r] += offsets[r - 1];
    std::vector<std::size_t> order(database.size());
    for (std::size_t i = 0; i < database.size(); ++i) order[offsets[distance[i]]++] = i;
    return order;
}

double ap_at_n(std::span<const std::uint8_t> relevance, std::size_t n) {
    const std::size_t limit = std::min(n, relevance.size());
    double acc = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < limit; ++i) {
        if (relevance[i] > 1) throw Error("ap_at_n: relevance must be 0 or 1");
        if (relevance[i]) {
            ++hits;
            acc += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return hits ? acc / static_cast<double>(hits) : 0.0;
}

std::vector<double> map_at_cutoffs(const hashing::PackedCodes& queries, std::span<const int> query_labels,
                                   const hashing::PackedCodes& database, std::span<const int> database_labels,
                                   std::span<const std::size_t> cutoffs) {
    check_bits("map_at_n", queries.bits(), database.bits());
    check_labels("map_at_n", queries.size(), query_labels.size());
    check_labels("map_at_n", database.size(), database_labels.size());
    if (queries.empty()) throw Error("map_at_n: no queries");
    std::vector<double> totals(cutoffs.size(), 0.0);
    std::vector<std::uint8_t> relevance(database.size());
    for (std::size_t q = 0; q < queries.size(); ++q) {
        auto order = rank(queries.row(q), database);
        for (std::size_t i = 0; i < order.size(); ++i) relevance[i] = database_labels[order[i]] == query_labels[q];
        for (std::size_t c = 0; c < cutoffs.size(); ++c) totals[c] += ap_at_n(relevance, cutoffs[c]);
    }
    for (auto& t : totals) t /= static_cast<double>(queries.size());
    return totals;
}

double map_at_n(const hashing::PackedCodes& queries, std::span<const int> query_labels,
                const hashing::PackedCodes& database, std::span<const int> database_labels, std::size_t n) {
    const std::size_t cutoff[1] = {n};
    return map_at_cutoffs(queries, query_labels, database, database_labels, cutoff).front();
}

double gmap(std::span<const double> map_values) {
    if (map_values.size() != kStandardCutoffs.size()) {
        throw Error("gmap: expected " + std::to_string(kStandardCutoffs.size()) + " values, got " +
                    std::to_string(map_values.size()));
    }
    double acc = 0.0;
    for (double v : map_values) acc += v * v;
    return std::sqrt(acc);
}

std::vector<PrPoint> pr_curve(const hashing::PackedCodes& queries, std::span<const int> query_labels,
                              const hashing::PackedCodes& database, std::span<const int> database_labels) {
    check_bits("pr_curve", queries.bits(), database.bits());
    check_labels("pr_curve", queries.size(), query_labels.size());
    check_labels("pr_curve", database.size(), database_labels.size());
    const std::size_t k = database.bits();
    std::vector<double> precision(k + 1, 0.0);
    std::vector<double> recall(k + 1, 0.0);
    std::size_t counted = 0;
    std::vector<std::size_t> retrieved(k + 1);
    std::vector<std::size_t> relevant(k + 1);
    for (std::size_t q = 0; q < queries.size(); ++q) {
        std::fill(retrieved.begin(), retrieved.end(), 0);
        std::fill(relevant.begin(), relevant.end(), 0);
        for (std::size_t i = 0; i < database.size(); ++i) {
            auto d = hamming_distance_packed(queries.row(q), database.row(i));
            ++retrieved[d];
            if (database_labels[i] == query_labels[q]) ++relevant[d];
        }
        for (std::size_t r = 1; r <= k; ++r) {
            retrieved[r] += retrieved[r - 1];
            relevant[r] += relevant[r - 1];
        }
        if (relevant[k] == 0) continue;
        ++counted;
        for (std::size_t r = 0; r <= k; ++r) {
            if (retrieved[r]) precision[r] += static_cast<double>(relevant[r]) / static_cast<double>(retrieved[r]);
            recall[r] += static_cast<double>(relevant[r]) / static_cast<double>(relevant[k]);
        }
    }
    std::vector<PrPoint> curve;
    curve.reserve(k + 1);
    for (std::size_t r = 0; r <= k; ++r) {
        double denom = counted ? static_cast<double>(counted) : 1.0;
        curve.push_back({r, precision[r] / denom, recall[r] / denom});
    }
    return curve;
}

}  // namespace s5vh::retrieval
