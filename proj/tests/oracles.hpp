#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Kept deliberately naive.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace oracle {

// h_t = exp(dt a) h_{t-1} + (exp(dt a) - 1)/a b_t x_t, y_t = sum_n c_t h_t;
// layouts as selective_scan.
inline std::vector<double> scan(const std::vector<double>& u, const std::vector<double>& delta,
                                const std::vector<double>& a, const std::vector<double>& b,
                                const std::vector<double>& c, std::size_t nb, std::size_t nt, std::size_t ne,
                                std::size_t ns) {
    std::vector<double> y(nb * nt * ne, 0.0);
    for (std::size_t bi = 0; bi < nb; ++bi)
        for (std::size_t e = 0; e < ne; ++e)
            for (std::size_t n = 0; n < ns; ++n) {
                double h = 0.0;
                const double an = a[e * ns + n];
                for (std::size_t t = 0; t < nt; ++t) {
                    const std::size_t row = bi * nt + t;
                    const double dt = delta[row * ne + e];
                    const double abar = std::exp(dt * an);
                    const double bbar = std::expm1(dt * an) / an * b[row * ns + n];
                    h = abar * h + bbar * u[row * ne + e];
                    y[row * ne + e] += c[row * ns + n] * h;
                }
            }
    return y;
}

inline double normwise_rel_error(const std::vector<double>& got, const std::vector<double>& want) {
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        diff = std::max(diff, std::abs(got[i] - want[i]));
        scale = std::max(scale, std::abs(want[i]));
    }
    return diff / std::max(scale, 1e-300);
}

inline int hamming(const std::vector<int>& a, const std::vector<int>& b) {
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

// Full stable sort by (distance, index).
inline std::vector<std::size_t> rank(const std::vector<int>& query, const std::vector<std::vector<int>>& db) {
    std::vector<std::size_t> order(db.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return hamming(query, db[x]) < hamming(query, db[y]); });
    return order;
}

// AP@N with |Rel(N)| = relevant items within the top N.
inline double ap(const std::vector<int>& relevant, std::size_t n) {
    n = std::min(n, relevant.size());
    double hits = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (relevant[i]) {
            hits += 1.0;
            sum += hits / static_cast<double>(i + 1);
        }
    }
    return hits > 0.0 ? sum / hits : 0.0;
}

inline double map_at(const std::vector<std::vector<int>>& q, const std::vector<int>& ql,
                     const std::vector<std::vector<int>>& db, const std::vector<int>& dl, std::size_t n) {
    double total = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        auto order = rank(q[i], db);
        std::vector<int> rel;
        for (auto j : order) rel.push_back(dl[j] == ql[i]);
        total += ap(rel, n);
    }
    return total / static_cast<double>(q.size());
}

struct PrPoint {
    double precision, recall;
};

inline std::vector<PrPoint> pr(const std::vector<std::vector<int>>& q, const std::vector<int>& ql,
                               const std::vector<std::vector<int>>& db, const std::vector<int>& dl, int bits) {
    std::vector<PrPoint> out(static_cast<std::size_t>(bits) + 1, {0.0, 0.0});
    std::size_t counted = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        int total_rel = 0;
        for (std::size_t j = 0; j < db.size(); ++j) total_rel += dl[j] == ql[i];
        if (total_rel == 0) continue;
        ++counted;
        for (int r = 0; r <= bits; ++r) {
            int got = 0, hit = 0;
            for (std::size_t j = 0; j < db.size(); ++j) {
                if (hamming(q[i], db[j]) <= r) {
                    ++got;
                    hit += dl[j] == ql[i];
                }
            }
            out[static_cast<std::size_t>(r)].precision += got ? static_cast<double>(hit) / got : 0.0;
            out[static_cast<std::size_t>(r)].recall += static_cast<double>(hit) / total_rel;
        }
    }
    for (auto& p : out) {
        if (counted) {
            p.precision /= static_cast<double>(counted);
            p.recall /= static_cast<double>(counted);
        }
    }
    return out;
}

// ||Phi Phi^T - K W||_F^2 + 1/2 sum_ij phi_i^T phi_j on +-1 rows.
inline double center_objective(const std::vector<std::vector<int>>& phi, const std::vector<std::vector<double>>& w) {
    const std::size_t nc = phi.size(), k = phi[0].size();
    double cons = 0.0, sep = 0.0;
    for (std::size_t i = 0; i < nc; ++i)
        for (std::size_t j = 0; j < nc; ++j) {
            double dot = 0.0;
            for (std::size_t b = 0; b < k; ++b) dot += phi[i][b] * phi[j][b];
            cons += (dot - static_cast<double>(k) * w[i][j]) * (dot - static_cast<double>(k) * w[i][j]);
            sep += dot;
        }
    return cons + 0.5 * sep;
}

// Exhaustive minimum of center_objective over all (N_c x K) sign matrices.
inline double exhaustive_center_optimum(const std::vector<std::vector<double>>& w, std::size_t k) {
    const std::size_t nc = w.size(), cells = nc * k;
    double best = INFINITY;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << cells); ++mask) {
        std::vector<std::vector<int>> phi(nc, std::vector<int>(k));
        for (std::size_t c = 0; c < cells; ++c) phi[c / k][c % k] = (mask >> c) & 1 ? 1 : -1;
        best = std::min(best, center_objective(phi, w));
    }
    return best;
}

}  // namespace oracle
