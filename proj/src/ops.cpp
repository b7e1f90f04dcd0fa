#include "s5vh/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace s5vh::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct AxisSplit {
    std::size_t outer = 1;
    std::size_t len = 1;
    std::size_t inner = 1;
};

AxisSplit split_axis(const char* op, const Shape& shape, std::size_t axis) {
    if (axis >= shape.size()) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                         to_string(shape));
    }
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.len = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
    Shape out = shape;
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
    return out;
}

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// Broadcast binary op: out has the larger shape; the smaller operand repeats.
template <class Fwd, class DA, class DB>
Tensor broadcast_binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
    bool a_big = is_suffix(b.shape(), a.shape());
    if (!a_big && !is_suffix(a.shape(), b.shape())) {
        throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " +
                         to_string(b.shape()));
    }
    const Shape& out_shape = a_big ? a.shape() : b.shape();
    std::size_t n = numel(out_shape);
    std::size_t na = a.numel();
    std::size_t nb = b.numel();
    std::vector<double> out(n);
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ad[i % na], bd[i % nb]);
    return emit(out_shape, std::move(out), {a, b}, [a, b, n, na, nb, da, db](std::span<const double> g) {
        auto ga = grad_target(a);
        auto gb = grad_target(b);
        auto ad = a.data();
        auto bd = b.data();
        for (std::size_t i = 0; i < n; ++i) {
            if (!ga.empty()) ga[i % na] += g[i] * da(ad[i % na], bd[i % nb]);
            if (!gb.empty()) gb[i % nb] += g[i] * db(ad[i % na], bd[i % nb]);
        }
    });
}

template <class Fwd, class Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
    std::size_t n = a.numel();
    std::vector<double> out(n);
    auto ad = a.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ad[i]);
    return emit(a.shape(), std::move(out), {a}, [a, n, deriv](std::span<const double> g) {
        auto ga = grad_target(a);
        auto ad = a.data();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * deriv(ad[i]);
    });
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_value(double x) {
    if (x > 30.0) return x;
    return std::log1p(std::exp(x));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return broadcast_binary(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return broadcast_binary(
        "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return broadcast_binary(
        "hadamard_product", a, b, [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
    return unary(a, [factor](double x) { return factor * x; }, [factor](double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
    return unary(a, [value](double x) { return x + value; }, [](double) { return 1.0; });
}

Tensor matmul(const Tensor& a, const Tensor& w) {
    if (a.rank() < 1 || w.rank() != 2 || a.shape().back() != w.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + to_string(a.shape()) + " and " + to_string(w.shape()));
    }
    std::size_t k = w.dim(0);
    std::size_t n = w.dim(1);
    std::size_t m = a.numel() / k;
    Shape out_shape = a.shape();
    out_shape.back() = n;
    std::vector<double> out(m * n);
    const auto im = static_cast<Eigen::Index>(m);
    const auto ik = static_cast<Eigen::Index>(k);
    const auto in = static_cast<Eigen::Index>(n);
    MapMat(out.data(), im, in).noalias() = ConstMapMat(a.data().data(), im, ik) * ConstMapMat(w.data().data(), ik, in);
    return emit(std::move(out_shape), std::move(out), {a, w}, [a, w, im, ik, in](std::span<const double> g) {
        ConstMapMat gm(g.data(), im, in);
        if (auto ga = grad_target(a); !ga.empty()) {
            MapMat(ga.data(), im, ik).noalias() += gm * ConstMapMat(w.data().data(), ik, in).transpose();
        }
        if (auto gw = grad_target(w); !gw.empty()) {
            MapMat(gw.data(), ik, in).noalias() += ConstMapMat(a.data().data(), im, ik).transpose() * gm;
        }
    });
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + to_string(a.shape()));
    std::size_t r = a.dim(0);
    std::size_t c = a.dim(1);
    std::vector<double> out(r * c);
    auto ad = a.data();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = ad[i * c + j];
    return emit({c, r}, std::move(out), {a}, [a, r, c](std::span<const double> g) {
        auto ga = grad_target(a);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
    });
}

Tensor tanh(const Tensor& a) {
    return unary(
        a, [](double x) { return std::tanh(x); },
        [](double x) {
            double t = std::tanh(x);
            return 1.0 - t * t;
        });
}

Tensor silu(const Tensor& a) {
    return unary(
        a, [](double x) { return x * sigmoid(x); },
        [](double x) {
            double s = sigmoid(x);
            return s * (1.0 + x * (1.0 - s));
        });
}

Tensor softplus(const Tensor& a) { return unary(a, softplus_value, sigmoid); }

Tensor exp(const Tensor& a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Tensor log(const Tensor& a) {
    return unary(a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
    return unary(a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.rank() < 1 || gamma.shape() != Shape{x.shape().back()} || beta.shape() != gamma.shape()) {
        throw ShapeError("layer_norm: input " + to_string(x.shape()) + " with gamma " + to_string(gamma.shape()) +
                         " and beta " + to_string(beta.shape()));
    }
    std::size_t c = x.shape().back();
    std::size_t rows = x.numel() / c;
    std::vector<double> out(x.numel());
    auto xhat = std::make_shared<std::vector<double>>(x.numel());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    auto xd = x.data();
    auto gd = gamma.data();
    auto bd = beta.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = xd.data() + r * c;
        double mu = 0;
        for (std::size_t j = 0; j < c; ++j) mu += row[j];
        mu /= static_cast<double>(c);
        double var = 0;
        for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(c);
        double inv = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = inv;
        for (std::size_t j = 0; j < c; ++j) {
            double h = (row[j] - mu) * inv;
            (*xhat)[r * c + j] = h;
            out[r * c + j] = h * gd[j] + bd[j];
        }
    }
    return emit(x.shape(), std::move(out), {x, gamma, beta},
                [x, gamma, beta, xhat, inv_std, rows, c](std::span<const double> g) {
                    auto gx = grad_target(x);
                    auto gg = grad_target(gamma);
                    auto gb = grad_target(beta);
                    auto gd = gamma.data();
                    std::vector<double> dxhat(c);
                    for (std::size_t r = 0; r < rows; ++r) {
                        const double* gr = g.data() + r * c;
                        const double* hr = xhat->data() + r * c;
                        double m1 = 0;
                        double m2 = 0;
                        for (std::size_t j = 0; j < c; ++j) {
                            if (!gg.empty()) gg[j] += gr[j] * hr[j];
                            if (!gb.empty()) gb[j] += gr[j];
                            dxhat[j] = gr[j] * gd[j];
                            m1 += dxhat[j];
                            m2 += dxhat[j] * hr[j];
                        }
                        if (gx.empty()) continue;
                        m1 /= static_cast<double>(c);
                        m2 /= static_cast<double>(c);
                        double inv = (*inv_std)[r];
                        for (std::size_t j = 0; j < c; ++j) gx[r * c + j] += inv * (dxhat[j] - m1 - hr[j] * m2);
                    }
                });
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (x.rank() != 3 || weight.rank() != 2 || weight.dim(0) != x.dim(2) || bias.shape() != Shape{x.dim(2)}) {
        throw ShapeError("depthwise_conv1d: input " + to_string(x.shape()) + " with weight " +
                         to_string(weight.shape()) + " and bias " + to_string(bias.shape()));
    }
    std::size_t nb = x.dim(0);
    std::size_t nt = x.dim(1);
    std::size_t nc = x.dim(2);
    std::size_t width = weight.dim(1);
    std::vector<double> out(x.numel());
    auto xd = x.data();
    auto wd = weight.data();
    auto bd = bias.data();
    for (std::size_t b = 0; b < nb; ++b) {
        for (std::size_t t = 0; t < nt; ++t) {
            double* o = out.data() + (b * nt + t) * nc;
            for (std::size_t c = 0; c < nc; ++c) o[c] = bd[c];
            for (std::size_t k = 0; k < width; ++k) {
                // tap k reads step t - (width - 1) + k
                if (t + k + 1 < width) continue;
                std::size_t src = t + k + 1 - width;
                const double* xi = xd.data() + (b * nt + src) * nc;
                for (std::size_t c = 0; c < nc; ++c) o[c] += wd[c * width + k] * xi[c];
            }
        }
    }
    return emit(x.shape(), std::move(out), {x, weight, bias},
                [x, weight, bias, nb, nt, nc, width](std::span<const double> g) {
                    auto gx = grad_target(x);
                    auto gw = grad_target(weight);
                    auto gbias = grad_target(bias);
                    auto xd = x.data();
                    auto wd = weight.data();
                    for (std::size_t b = 0; b < nb; ++b) {
                        for (std::size_t t = 0; t < nt; ++t) {
                            const double* go = g.data() + (b * nt + t) * nc;
                            if (!gbias.empty())
                                for (std::size_t c = 0; c < nc; ++c) gbias[c] += go[c];
                            for (std::size_t k = 0; k < width; ++k) {
                                if (t + k + 1 < width) continue;
                                std::size_t src = t + k + 1 - width;
                                for (std::size_t c = 0; c < nc; ++c) {
                                    if (!gw.empty()) gw[c * width + k] += go[c] * xd[(b * nt + src) * nc + c];
                                    if (!gx.empty()) gx[(b * nt + src) * nc + c] += go[c] * wd[c * width + k];
                                }
                            }
                        }
                    }
                });
}

Tensor sum(const Tensor& x, std::size_t axis) {
    auto s = split_axis("sum", x.shape(), axis);
    std::vector<double> out(s.outer * s.inner, 0.0);
    auto xd = x.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t l = 0; l < s.len; ++l)
            for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += xd[(o * s.len + l) * s.inner + i];
    return emit(drop_axis(x.shape(), axis), std::move(out), {x}, [x, s](std::span<const double> g) {
        auto gx = grad_target(x);
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t l = 0; l < s.len; ++l)
                for (std::size_t i = 0; i < s.inner; ++i) gx[(o * s.len + l) * s.inner + i] += g[o * s.inner + i];
    });
}

Tensor mean(const Tensor& x, std::size_t axis) {
    auto len = split_axis("mean_over_axis", x.shape(), axis).len;
    return scale(sum(x, axis), 1.0 / static_cast<double>(len));
}

Tensor sum_all(const Tensor& x) {
    auto xd = x.data();
    double acc = 0;
    for (double v : xd) acc += v;
    std::size_t n = x.numel();
    return emit({}, {acc}, {x}, [x, n](std::span<const double> g) {
        auto gx = grad_target(x);
        for (std::size_t i = 0; i < n; ++i) gx[i] += g[0];
    });
}

Tensor mean_all(const Tensor& x) {
    if (x.numel() == 0) throw ShapeError("mean_all: empty tensor");
    return scale(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor log_sum_exp(const Tensor& x, std::size_t axis) {
    auto s = split_axis("log_sum_exp", x.shape(), axis);
    if (s.len == 0) throw ShapeError("log_sum_exp: empty reduction axis in " + to_string(x.shape()));
    std::vector<double> out(s.outer * s.inner);
    auto xd = x.data();
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
            double mx = -INFINITY;
            for (std::size_t l = 0; l < s.len; ++l) mx = std::max(mx, xd[(o * s.len + l) * s.inner + i]);
            double acc = 0;
            for (std::size_t l = 0; l < s.len; ++l) acc += std::exp(xd[(o * s.len + l) * s.inner + i] - mx);
            out[o * s.inner + i] = mx + std::log(acc);
        }
    }
    auto lse = std::make_shared<std::vector<double>>(out);
    return emit(drop_axis(x.shape(), axis), std::move(out), {x}, [x, s, lse](std::span<const double> g) {
        auto gx = grad_target(x);
        auto xd = x.data();
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t l = 0; l < s.len; ++l)
                for (std::size_t i = 0; i < s.inner; ++i) {
                    std::size_t idx = (o * s.len + l) * s.inner + i;
                    gx[idx] += g[o * s.inner + i] * std::exp(xd[idx] - (*lse)[o * s.inner + i]);
                }
    });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
    auto s = split_axis("slice", x.shape(), axis);
    if (start + length > s.len) {
        throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") exceeds axis " + std::to_string(axis) + " of " + to_string(x.shape()));
    }
    Shape out_shape = x.shape();
    out_shape[axis] = length;
    std::vector<double> out(s.outer * length * s.inner);
    auto xd = x.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        std::copy_n(xd.data() + (o * s.len + start) * s.inner, length * s.inner, out.data() + o * length * s.inner);
    return emit(std::move(out_shape), std::move(out), {x}, [x, s, start, length](std::span<const double> g) {
        auto gx = grad_target(x);
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t j = 0; j < length * s.inner; ++j)
                gx[(o * s.len + start) * s.inner + j] += g[o * length * s.inner + j];
    });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    Shape out_shape = parts.front().shape();
    split_axis("concat", out_shape, axis);
    std::size_t total = 0;
    for (const auto& p : parts) {
        Shape a = p.shape();
        Shape b = out_shape;
        if (a.size() != b.size()) throw ShapeError("concat: rank mismatch " + to_string(a) + " vs " + to_string(b));
        a[axis] = b[axis] = 0;
        if (a != b) throw ShapeError("concat: incompatible shapes " + to_string(p.shape()) + " and " +
                                     to_string(parts.front().shape()));
        total += p.dim(axis);
    }
    out_shape[axis] = total;
    auto s = split_axis("concat", out_shape, axis);
    std::vector<double> out(numel(out_shape));
    std::size_t offset = 0;
    for (const auto& p : parts) {
        std::size_t len = p.dim(axis);
        auto pd = p.data();
        for (std::size_t o = 0; o < s.outer; ++o)
            std::copy_n(pd.data() + o * len * s.inner, len * s.inner, out.data() + (o * s.len + offset) * s.inner);
        offset += len;
    }
    return emit(std::move(out_shape), std::move(out), parts, [parts, axis, s](std::span<const double> g) {
        std::size_t offset = 0;
        for (const auto& p : parts) {
            std::size_t len = p.dim(axis);
            auto gp = grad_target(p);
            if (!gp.empty()) {
                for (std::size_t o = 0; o < s.outer; ++o)
                    for (std::size_t j = 0; j < len * s.inner; ++j)
                        gp[o * len * s.inner + j] += g[(o * s.len + offset) * s.inner + j];
            }
            offset += len;
        }
    });
}

Tensor reverse(const Tensor& x, std::size_t axis) {
    auto s = split_axis("reverse_along_time", x.shape(), axis);
    std::vector<double> out(x.numel());
    auto xd = x.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t l = 0; l < s.len; ++l)
            std::copy_n(xd.data() + (o * s.len + l) * s.inner, s.inner,
                        out.data() + (o * s.len + (s.len - 1 - l)) * s.inner);
    return emit(x.shape(), std::move(out), {x}, [x, s](std::span<const double> g) {
        auto gx = grad_target(x);
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t l = 0; l < s.len; ++l)
                for (std::size_t i = 0; i < s.inner; ++i)
                    gx[(o * s.len + l) * s.inner + i] += g[(o * s.len + (s.len - 1 - l)) * s.inner + i];
    });
}

namespace {

void check_row_index(const char* op, std::size_t batch, std::size_t rows,
                     const std::vector<std::vector<std::size_t>>& index, std::size_t& width) {
    if (index.size() != batch) {
        throw ShapeError(std::string(op) + ": index has " + std::to_string(index.size()) + " rows for batch " +
                         std::to_string(batch));
    }
    width = index.empty() ? 0 : index.front().size();
    for (const auto& row : index) {
        if (row.size() != width) throw ShapeError(std::string(op) + ": ragged index rows");
        for (auto i : row)
            if (i >= rows) throw ShapeError(std::string(op) + ": row index " + std::to_string(i) + " >= " +
                                            std::to_string(rows));
    }
}

}  // namespace

Tensor gather_rows(const Tensor& x, const std::vector<std::vector<std::size_t>>& index) {
    if (x.rank() != 3) throw ShapeError("gather_rows: expected (B, T, C), got " + to_string(x.shape()));
    std::size_t nb = x.dim(0), nt = x.dim(1), nc = x.dim(2), width = 0;
    check_row_index("gather_rows", nb, nt, index, width);
    std::vector<double> out(nb * width * nc);
    auto xd = x.data();
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t j = 0; j < width; ++j)
            std::copy_n(xd.data() + (b * nt + index[b][j]) * nc, nc, out.data() + (b * width + j) * nc);
    return emit({nb, width, nc}, std::move(out), {x}, [x, index, nb, nt, nc, width](std::span<const double> g) {
        auto gx = grad_target(x);
        for (std::size_t b = 0; b < nb; ++b)
            for (std::size_t j = 0; j < width; ++j)
                for (std::size_t c = 0; c < nc; ++c) gx[(b * nt + index[b][j]) * nc + c] += g[(b * width + j) * nc + c];
    });
}

Tensor scatter_rows(const Tensor& x, const std::vector<std::vector<std::size_t>>& index, std::size_t length) {
    if (x.rank() != 3) throw ShapeError("scatter_rows: expected (B, T, C), got " + to_string(x.shape()));
    std::size_t nb = x.dim(0), nc = x.dim(2), width = 0;
    check_row_index("scatter_rows", nb, length, index, width);
    if (width != x.dim(1)) {
        throw ShapeError("scatter_rows: index width " + std::to_string(width) + " vs input " + to_string(x.shape()));
    }
    std::vector<double> out(nb * length * nc, 0.0);
    auto xd = x.data();
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t j = 0; j < width; ++j)
            for (std::size_t c = 0; c < nc; ++c) out[(b * length + index[b][j]) * nc + c] += xd[(b * width + j) * nc + c];
    return emit({nb, length, nc}, std::move(out), {x}, [x, index, nb, nc, width, length](std::span<const double> g) {
        auto gx = grad_target(x);
        for (std::size_t b = 0; b < nb; ++b)
            for (std::size_t j = 0; j < width; ++j)
                for (std::size_t c = 0; c < nc; ++c) gx[(b * width + j) * nc + c] += g[(b * length + index[b][j]) * nc + c];
    });
}

Tensor sign_ste(const Tensor& x) {
    return unary(x, [](double v) { return v >= 0.0 ? 1.0 : -1.0; }, [](double) { return 1.0; });
}

Tensor diagonal(const Tensor& x) {
    if (x.rank() != 2 || x.dim(0) != x.dim(1)) throw ShapeError("diagonal: expected square matrix, got " + to_string(x.shape()));
    std::size_t n = x.dim(0);
    std::vector<double> out(n);
    auto xd = x.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = xd[i * n + i];
    return emit({n}, std::move(out), {x}, [x, n](std::span<const double> g) {
        auto gx = grad_target(x);
        for (std::size_t i = 0; i < n; ++i) gx[i * n + i] += g[i];
    });
}

Tensor pick(const Tensor& x, const std::vector<std::size_t>& labels) {
    if (x.rank() != 2 || labels.size() != x.dim(0)) {
        throw ShapeError("pick: input " + to_string(x.shape()) + " with " + std::to_string(labels.size()) + " labels");
    }
    std::size_t nb = x.dim(0), nc = x.dim(1);
    for (auto l : labels)
        if (l >= nc) throw ShapeError("pick: label " + std::to_string(l) + " out of range for " + to_string(x.shape()));
    std::vector<double> out(nb);
    auto xd = x.data();
    for (std::size_t b = 0; b < nb; ++b) out[b] = xd[b * nc + labels[b]];
    return emit({nb}, std::move(out), {x}, [x, labels, nb, nc](std::span<const double> g) {
        auto gx = grad_target(x);
        for (std::size_t b = 0; b < nb; ++b) gx[b * nc + labels[b]] += g[b];
    });
}

}  // namespace s5vh::ops
