#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace wsr {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

namespace detail {

struct TensorImpl;

// One recorded operation. The output owns the node; the node owns its inputs,
// so the graph stays alive exactly as long as its root.
struct Node {
    const char* op = "";
    std::vector<Tensor> inputs;
    // Reads out.grad and accumulates into the inputs' grads.
    std::function<void(const TensorImpl& out)> backward;
};

struct TensorImpl {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::shared_ptr<Node> node;
};

}  // namespace detail

/// Dense float32 array with define-by-run reverse-mode autodiff.
///
/// A Tensor is a shared handle: copies alias the same storage, like a
/// framework tensor. Use clone() for a deep copy. Image tensors are laid out
/// channels x height x width, row-major, with an optional leading batch dim.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0f); }
    static Tensor full(Shape shape, float v) { return Tensor(std::move(shape), v); }
    static Tensor scalar(float v) { return Tensor(Shape{1}, v); }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int ndim() const { return static_cast<int>(shape().size()); }
    int dim(int i) const;
    std::size_t numel() const;

    std::span<const float> data() const;
    // Writable view. Only meant for leaves (parameters, inputs being built).
    std::span<float> mutable_data();
    float item() const;

    float operator[](std::size_t i) const { return data()[i]; }
    float at(int c, int y, int x) const;
    float& at(int c, int y, int x);

    bool requires_grad() const;
    Tensor& set_requires_grad(bool on = true);
    bool has_grad() const;
    std::span<const float> grad() const;
    std::span<float> mutable_grad();  // allocates zeros on first call
    void zero_grad();

    bool is_leaf() const;
    const char* op_name() const;

    Tensor clone() const;   // deep copy of data, detached
    Tensor detach() const;  // shares nothing with the graph; copies data
    Tensor reshape(Shape shape) const;  // differentiable

    detail::TensorImpl* impl() const { return impl_.get(); }
    bool same(const Tensor& other) const { return impl_ == other.impl_; }

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

/// Populates grad of every tracked ancestor with d(loss)/d(ancestor).
/// Leaf grads accumulate across calls; intermediate grads are reset first.
void backward(const Tensor& loss);

bool grad_enabled();

/// Disables graph recording for the current thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

namespace detail {

// Builds an op result. A node is recorded only when grad mode is on and some
// input requires grad; otherwise `backward` is dropped.
Tensor make_result(Shape shape, std::vector<float> data, const char* op,
                   std::vector<Tensor> inputs,
                   std::function<void(const TensorImpl& out)> backward);

// Adds `g` into t's grad buffer (allocating it) if t tracks gradients.
void accumulate(const Tensor& t, std::span<const float> g);
// Returns t's grad buffer for in-place accumulation, or an empty span.
std::span<float> grad_sink(const Tensor& t);

}  // namespace detail

}  // namespace wsr
