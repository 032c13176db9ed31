// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace aitd {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {
struct TensorImpl;
struct Node;
} // namespace detail

/// Dense row-major float32 tensor with optional gradient tracking.
///
/// Tensor is a shared handle: copies alias the same storage, the way model
/// parameters are shared between a model, its parameter store, and the
/// computation graph. Use clone() for an independent copy.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<float> data, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }

    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<float> data();
    std::span<const float> data() const;
    float item() const;

    bool requires_grad() const;
    /// Marking a tensor as not requiring grad also drops any gradient it holds.
    void set_requires_grad(bool value);

    bool has_grad() const;
    std::span<const float> grad() const;
    /// Allocates a zero gradient if absent. Requires requires_grad().
    std::span<float> mutable_grad();
    void zero_grad();
    void clear_grad();

    /// True when this tensor was produced by a recorded operation.
    bool has_node() const;

    Tensor clone() const;
    /// Same storage, cut from the computation graph.
    Tensor detach() const;

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

    // Internal: used by operation implementations.
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

/// Whether operations currently record backward rules (thread-local).
bool grad_enabled();

/// Disables graph recording for the lifetime of the guard.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Reverse-mode pass from a scalar loss. Accumulates d(loss)/d(t) into every
/// reachable tensor with requires_grad, then releases the graph.
void backward(const Tensor& loss);

/// Operations reachable from `root`, ordered so every operation's inputs
/// precede it. Each entry is a tensor that owns a recorded operation.
std::vector<Tensor> topological_order(const Tensor& root);

namespace detail {

using BackwardFn = std::function<void(std::span<const float> grad_out)>;

struct Node {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    BackwardFn backward;
};

struct TensorImpl {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;
    bool requires_grad = false;
    std::shared_ptr<Node> node;
};

/// Builds an operation result. The backward rule is recorded only when
/// gradients are enabled and some input requires them.
Tensor make_result(Shape shape, std::vector<float> data, std::vector<Tensor> inputs, BackwardFn fn);

/// Gradient buffer of `t`, allocated on demand; empty span when `t` does
/// not require grad.
std::span<float> grad_sink(const Tensor& t);

} // namespace detail

} // namespace aitd
