#include "wavesr/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "wavesr/error.hpp"

namespace wsr {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, float fill) : impl_(std::make_shared<detail::TensorImpl>()) {
    const std::size_t n = shape_numel(shape);
    impl_->shape = std::move(shape);
    impl_->data.assign(n, fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : impl_(std::make_shared<detail::TensorImpl>()) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
}

const Shape& Tensor::shape() const {
    if (!impl_) throw ContractError("use of undefined tensor");
    return impl_->shape;
}

int Tensor::dim(int i) const {
    const Shape& s = shape();
    if (i < 0) i += static_cast<int>(s.size());
    if (i < 0 || i >= static_cast<int>(s.size())) {
        throw ShapeError("dimension index " + std::to_string(i) + " out of range for " + shape_str(s));
    }
    return s[static_cast<std::size_t>(i)];
}

std::size_t Tensor::numel() const { return impl_ ? impl_->data.size() : 0; }

std::span<const float> Tensor::data() const {
    if (!impl_) throw ContractError("use of undefined tensor");
    return impl_->data;
}

std::span<float> Tensor::mutable_data() {
    if (!impl_) throw ContractError("use of undefined tensor");
    return impl_->data;
}

float Tensor::item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
}

float Tensor::at(int c, int y, int x) const {
    const Shape& s = shape();
    return impl_->data[(static_cast<std::size_t>(c) * s[1] + y) * s[2] + x];
}

float& Tensor::at(int c, int y, int x) {
    const Shape& s = shape();
    return impl_->data[(static_cast<std::size_t>(c) * s[1] + y) * s[2] + x];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
    if (!impl_) throw ContractError("use of undefined tensor");
    if (impl_->node && !on) throw ContractError("cannot stop tracking a non-leaf tensor; use detach()");
    impl_->requires_grad = on;
    return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const float> Tensor::grad() const {
    if (!impl_) throw ContractError("use of undefined tensor");
    return impl_->grad;
}

std::span<float> Tensor::mutable_grad() {
    if (!impl_) throw ContractError("use of undefined tensor");
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0f);
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (impl_) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

bool Tensor::is_leaf() const { return !impl_ || !impl_->node; }

const char* Tensor::op_name() const { return impl_ && impl_->node ? impl_->node->op : "leaf"; }

Tensor Tensor::clone() const { return Tensor(shape(), impl_->data); }

Tensor Tensor::detach() const { return clone(); }

Tensor Tensor::reshape(Shape new_shape) const {
    if (shape_numel(new_shape) != numel()) {
        throw ShapeError("cannot reshape " + shape_str(shape()) + " to " + shape_str(new_shape));
    }
    Tensor in = *this;
    return detail::make_result(std::move(new_shape), impl_->data, "reshape", {in},
                               [in](const detail::TensorImpl& out) { detail::accumulate(in, out.grad); });
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace detail {

Tensor make_result(Shape shape, std::vector<float> data, const char* op, std::vector<Tensor> inputs,
                   std::function<void(const TensorImpl& out)> backward) {
    Tensor out(std::move(shape), std::move(data));
    if (!g_grad_enabled) return out;
    const bool tracked = std::any_of(inputs.begin(), inputs.end(),
                                     [](const Tensor& t) { return t.requires_grad(); });
    if (!tracked) return out;
    auto node = std::make_shared<Node>();
    node->op = op;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
    out.impl()->node = std::move(node);
    out.impl()->requires_grad = true;
    return out;
}

std::span<float> grad_sink(const Tensor& t) {
    TensorImpl* impl = t.impl();
    if (!impl || !impl->requires_grad) return {};
    if (impl->grad.empty()) impl->grad.assign(impl->data.size(), 0.0f);
    return impl->grad;
}

void accumulate(const Tensor& t, std::span<const float> g) {
    std::span<float> sink = grad_sink(t);
    if (sink.empty()) return;
    for (std::size_t i = 0; i < sink.size(); ++i) sink[i] += g[i];
}

}  // namespace detail

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward() requires a scalar loss, got shape " +
                            (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
    }
    if (!loss.requires_grad()) throw ContractError("backward() on a tensor that does not require grad");

    // Iterative post-order DFS gives a topological order without recursion.
    std::vector<detail::TensorImpl*> order;
    std::unordered_set<detail::TensorImpl*> visited;
    std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
    stack.emplace_back(loss.impl(), 0);
    visited.insert(loss.impl());
    while (!stack.empty()) {
        auto& [impl, next] = stack.back();
        if (impl->node && next < impl->node->inputs.size()) {
            detail::TensorImpl* child = impl->node->inputs[next++].impl();
            if (child && child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
            continue;
        }
        order.push_back(impl);
        stack.pop_back();
    }

    for (detail::TensorImpl* impl : order) {
        if (impl->node) impl->grad.assign(impl->data.size(), 0.0f);
    }
    loss.impl()->grad[0] += 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::TensorImpl* impl = *it;
        if (impl->node && impl->node->backward) impl->node->backward(*impl);
    }
}

}  // namespace wsr
