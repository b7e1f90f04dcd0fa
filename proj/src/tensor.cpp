#include "s5vh/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace s5vh {

namespace {

thread_local Tape* g_active_tape = nullptr;

std::int64_t payload_bytes(std::size_t n, DType dtype) {
    return static_cast<std::int64_t>(n) * (dtype == DType::F32 ? 4 : 8);
}

}  // namespace

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::atomic<std::int64_t> MemoryTracker::live_{0};
std::atomic<std::int64_t> MemoryTracker::peak_{0};

void MemoryTracker::on_alloc(std::int64_t bytes) {
    auto now = live_.fetch_add(bytes) + bytes;
    auto prev = peak_.load();
    while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
    }
}

void MemoryTracker::on_free(std::int64_t bytes) { live_.fetch_sub(bytes); }
std::int64_t MemoryTracker::live() { return live_.load(); }
std::int64_t MemoryTracker::peak() { return peak_.load(); }
void MemoryTracker::reset_peak() { peak_.store(live_.load()); }

TensorImpl::TensorImpl(Shape s, std::vector<double> d, DType t, bool rg)
    : shape(std::move(s)), data(std::move(d)), dtype(t), requires_grad(rg) {
    if (numel(shape) != data.size()) {
        throw ShapeError("tensor: shape " + to_string(shape) + " does not match payload of " +
                         std::to_string(data.size()) + " elements");
    }
    MemoryTracker::on_alloc(payload_bytes(data.size(), dtype));
}

TensorImpl::~TensorImpl() { MemoryTracker::on_free(payload_bytes(data.size(), dtype)); }

double round_to(DType dtype, double value) {
    return dtype == DType::F32 ? static_cast<double>(static_cast<float>(value)) : value;
}

DType promote(const std::vector<Tensor>& inputs) {
    for (const auto& t : inputs) {
        if (t.defined() && t.dtype() == DType::F64) return DType::F64;
    }
    return DType::F32;
}

Tensor Tensor::zeros(Shape shape, DType dtype, bool requires_grad) {
    auto n = s5vh::numel(shape);
    return Tensor(std::make_shared<TensorImpl>(std::move(shape), std::vector<double>(n, 0.0), dtype,
                                               requires_grad));
}

Tensor Tensor::full(Shape shape, double value, DType dtype, bool requires_grad) {
    auto n = s5vh::numel(shape);
    return Tensor(std::make_shared<TensorImpl>(std::move(shape),
                                               std::vector<double>(n, round_to(dtype, value)),
                                               dtype, requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, DType dtype, bool requires_grad) {
    Tensor t(std::make_shared<TensorImpl>(std::move(shape), std::move(data), dtype, requires_grad));
    t.round_to_dtype();
    return t;
}

Tensor Tensor::scalar(double value, DType dtype) { return from({}, {value}, dtype); }

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= rank()) {
        throw ShapeError("dim: axis " + std::to_string(axis) + " out of range for shape " +
                         to_string(shape()));
    }
    return impl_->shape[axis];
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item: tensor of shape " + to_string(shape()) + " is not a scalar");
    return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    if (index.size() != rank()) throw ShapeError("at: index rank mismatch for shape " + to_string(shape()));
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i >= impl_->shape[axis]) throw ShapeError("at: index out of range for shape " + to_string(shape()));
        flat = flat * impl_->shape[axis] + i;
        ++axis;
    }
    return impl_->data[flat];
}

std::span<double> Tensor::grad_buffer() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
    return impl_->grad;
}

Tensor Tensor::detach() const {
    return Tensor(std::make_shared<TensorImpl>(impl_->shape, impl_->data, impl_->dtype, false));
}

void Tensor::round_to_dtype() {
    if (impl_->dtype == DType::F32) {
        for (auto& v : impl_->data) v = round_to(DType::F32, v);
    }
}

Tensor Tensor::to(DType dtype) const {
    return from(impl_->shape, impl_->data, dtype, impl_->requires_grad);
}

void Tape::record(std::shared_ptr<TensorImpl> output, BackwardFn fn) {
    nodes_.push_back({std::move(output), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) throw ShapeError("backward: loss must be scalar, got " + to_string(loss.shape()));
    if (!loss.requires_grad()) {
        nodes_.clear();
        return;
    }
    auto* root = loss.impl();
    root->grad.assign(1, 1.0);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->output->grad.empty()) continue;
        it->fn(it->output->grad);
    }
    nodes_.clear();
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

Tensor emit(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
            std::function<void(std::span<const double>)> backward) {
    DType dtype = promote(inputs);
    if (dtype == DType::F32) {
        for (auto& v : data) v = round_to(DType::F32, v);
    }
    Tape* tape = active_tape();
    bool needs_grad = will_record(inputs);
    auto impl = std::make_shared<TensorImpl>(std::move(shape), std::move(data), dtype, needs_grad);
    if (needs_grad) tape->record(impl, std::move(backward));
    return Tensor(std::move(impl));
}

bool will_record(const std::vector<Tensor>& inputs) {
    return active_tape() != nullptr &&
           std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.defined() && t.requires_grad(); });
}

std::span<double> grad_target(const Tensor& t) {
    if (!t.defined() || !t.requires_grad()) return {};
    auto* impl = t.impl();
    if (impl->grad.empty()) impl->grad.assign(impl->data.size(), 0.0);
    return impl->grad;
}

}  // namespace s5vh
