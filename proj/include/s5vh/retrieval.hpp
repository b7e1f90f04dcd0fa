#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "s5vh/hashing.hpp"

namespace s5vh::retrieval {

/// Hamming distance between two +-1 codes, (K - b1^T b2) / 2.
std::size_t hamming_distance(std::span<const std::int8_t> a, std::span<const std::int8_t> b);
/// Popcount of XOR over packed rows.
std::size_t hamming_distance_packed(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

struct CodeDatabase {
    hashing::PackedCodes codes;
    std::vector<std::string> ids;
    std::vector<int> labels;  // optional; empty when unlabeled

    std::size_t size() const { return codes.size(); }
    std::size_t bits() const { return codes.bits(); }
};

/// Item indices by ascending Hamming distance; ties by ascending index.
std::vector<std::size_t> rank(std::span<const std::uint8_t> query, const hashing::PackedCodes& database);

/// AP@N = (1/|Rel(N)|) sum_{n<=N} P(n) r(n), |Rel(N)| = relevant items in
/// the top N; 0 when none. Uses the first min(N, size) entries.
double ap_at_n(std::span<const std::uint8_t> relevance, std::size_t n);

/// Mean AP@N over queries, relevance = identical label.
double map_at_n(const hashing::PackedCodes& queries, std::span<const int> query_labels,
                const hashing::PackedCodes& database, std::span<const int> database_labels, std::size_t n);

/// mAP@N for every N in `cutoffs` with one ranking per query.
std::vector<double> map_at_cutoffs(const hashing::PackedCodes& queries, std::span<const int> query_labels,
                                   const hashing::PackedCodes& database, std::span<const int> database_labels,
                                   std::span<const std::size_t> cutoffs);

inline constexpr std::array<std::size_t, 6> kStandardCutoffs{5, 20, 40, 60, 80, 100};

/// Root-sum-of-squares aggregate of the six standard mAP values.
double gmap(std::span<const double> map_values);

struct PrPoint {
    std::size_t radius;
    double precision;
    double recall;
};

/// Precision/recall of "retrieve everything within Hamming radius r" for
/// r = 0..K, averaged over queries. Precision of an empty retrieval is 0;
/// queries without any relevant database item are skipped.
std::vector<PrPoint> pr_curve(const hashing::PackedCodes& queries, std::span<const int> query_labels,
                              const hashing::PackedCodes& database, std::span<const int> database_labels);

}  // namespace s5vh::retrieval
