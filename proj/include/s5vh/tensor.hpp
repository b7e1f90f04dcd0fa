#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace s5vh {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an operation receives operands of incompatible shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t numel(const Shape& shape);

/// Live/peak byte counters for tensor payloads. Feeds the bench's memory
/// budget, so it counts logical element bytes (4 or 8 per entry).
class MemoryTracker {
public:
    static void on_alloc(std::int64_t bytes);
    static void on_free(std::int64_t bytes);
    static std::int64_t live();
    static std::int64_t peak();
    static void reset_peak();

private:
    static std::atomic<std::int64_t> live_;
    static std::atomic<std::int64_t> peak_;
};

struct TensorImpl {
    TensorImpl(Shape s, std::vector<double> d, DType t, bool rg);
    ~TensorImpl();
    TensorImpl(const TensorImpl&) = delete;
    TensorImpl& operator=(const TensorImpl&) = delete;

    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    DType dtype;
    bool requires_grad;
};

/// Dense row-major array with an optional gradient buffer. Storage is double;
/// in F32 mode every produced value is rounded to the nearest float, so the
/// observable arithmetic is single precision with correctly rounded results.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, DType dtype = DType::F32, bool requires_grad = false);
    static Tensor full(Shape shape, double value, DType dtype = DType::F32, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> data, DType dtype = DType::F32,
                       bool requires_grad = false);
    static Tensor scalar(double value, DType dtype = DType::F32);

    bool defined() const { return static_cast<bool>(impl_); }
    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const { return impl_->data.size(); }
    DType dtype() const { return impl_->dtype; }
    bool requires_grad() const { return impl_->requires_grad; }

    std::span<const double> data() const { return impl_->data; }
    /// Writable view, intended for leaves (parameters, gradient-check probes).
    std::span<double> mutable_data() { return impl_->data; }
    double item() const;
    double at(std::initializer_list<std::size_t> index) const;

    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<const double> grad() const { return impl_->grad; }
    std::span<double> grad_buffer();
    void zero_grad() { impl_->grad.clear(); }

    Tensor detach() const;
    /// Rounds the payload in place to the tensor's dtype.
    void round_to_dtype();
    Tensor to(DType dtype) const;

    TensorImpl* impl() const { return impl_.get(); }

private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<TensorImpl> impl_;

    friend Tensor emit(Shape, std::vector<double>, const std::vector<Tensor>&,
                       std::function<void(std::span<const double>)>);
};

double round_to(DType dtype, double value);
DType promote(const std::vector<Tensor>& inputs);

/// Ordered record of differentiable operations. Backward replays the
/// recorded closures in reverse order.
class Tape {
public:
    using BackwardFn = std::function<void(std::span<const double>)>;

    void record(std::shared_ptr<TensorImpl> output, BackwardFn fn);
    /// Seeds d(loss)/d(loss) = 1 and propagates to every recorded input. The
    /// tape is cleared afterwards.
    void backward(const Tensor& loss);
    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    struct Node {
        std::shared_ptr<TensorImpl> output;
        BackwardFn fn;
    };
    std::vector<Node> nodes_;
};

/// Makes `tape` the recording target for the current thread.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

Tape* active_tape();

/// Produces an op result. When a tape is active and any input requires a
/// gradient, the result is marked differentiable and `backward` is recorded.
Tensor emit(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
            std::function<void(std::span<const double>)> backward);

/// Gradient accumulation target for `t`, or an empty span when `t` does not
/// require a gradient.
std::span<double> grad_target(const Tensor& t);

/// True when emit() on these inputs would record a backward closure.
bool will_record(const std::vector<Tensor>& inputs);

}  // namespace s5vh
