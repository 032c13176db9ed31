// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include "aitd/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "aitd/error.hpp"

namespace aitd {

namespace {

thread_local bool t_grad_enabled = true;

std::shared_ptr<detail::TensorImpl> make_impl(Shape shape, std::vector<float> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                         shape_string(shape));
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return impl;
}

detail::TensorImpl& checked(const std::shared_ptr<detail::TensorImpl>& impl) {
    if (!impl) {
        throw Error("use of an undefined tensor");
    }
    return *impl;
}

} // namespace

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            s += "x";
        }
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) {
            throw ShapeError("zero-sized dimension in shape " + shape_string(shape));
        }
        n *= d;
    }
    return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return Tensor(make_impl(std::move(shape), std::vector<float>(n, 0.0f), requires_grad));
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return Tensor(make_impl(std::move(shape), std::vector<float>(n, value), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data, bool requires_grad) {
    return Tensor(make_impl(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
    return Tensor(make_impl({1}, {value}, requires_grad));
}

const Shape& Tensor::shape() const { return checked(impl_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    const Shape& s = shape();
    if (axis >= s.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(s));
    }
    return s[axis];
}

std::size_t Tensor::numel() const { return checked(impl_).data.size(); }

std::span<float> Tensor::data() { return checked(impl_).data; }
std::span<const float> Tensor::data() const { return checked(impl_).data; }

float Tensor::item() const {
    if (numel() != 1) {
        throw ShapeError("item() on non-scalar tensor of shape " + shape_string(shape()));
    }
    return impl_->data[0];
}

bool Tensor::requires_grad() const { return checked(impl_).requires_grad; }

void Tensor::set_requires_grad(bool value) {
    auto& impl = checked(impl_);
    impl.requires_grad = value;
    if (!value) {
        impl.grad.clear();
        impl.grad.shrink_to_fit();
    }
}

bool Tensor::has_grad() const { return !checked(impl_).grad.empty(); }
std::span<const float> Tensor::grad() const { return checked(impl_).grad; }

std::span<float> Tensor::mutable_grad() {
    auto& impl = checked(impl_);
    if (!impl.requires_grad) {
        throw Error("gradient requested for a tensor that does not require grad");
    }
    if (impl.grad.empty()) {
        impl.grad.assign(impl.data.size(), 0.0f);
    }
    return impl.grad;
}

void Tensor::zero_grad() {
    auto& impl = checked(impl_);
    if (impl.requires_grad) {
        impl.grad.assign(impl.data.size(), 0.0f);
    }
}

void Tensor::clear_grad() { checked(impl_).grad.clear(); }

bool Tensor::has_node() const { return checked(impl_).node != nullptr; }

Tensor Tensor::clone() const {
    const auto& impl = checked(impl_);
    return Tensor(make_impl(impl.shape, impl.data, impl.requires_grad));
}

Tensor Tensor::detach() const {
    const auto& impl = checked(impl_);
    auto copy = make_impl(impl.shape, impl.data, false);
    return Tensor(std::move(copy));
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

std::vector<Tensor> topological_order(const Tensor& root) {
    std::vector<Tensor> order;
    if (!root.defined() || !root.has_node()) {
        return order;
    }
    // Iterative post-order DFS; a node is emitted after all of its inputs.
    std::unordered_set<const detail::TensorImpl*> visited;
    std::vector<std::pair<std::shared_ptr<detail::TensorImpl>, std::size_t>> stack;
    stack.emplace_back(root.impl(), 0);
    visited.insert(root.impl().get());
    while (!stack.empty()) {
        auto& [impl, next] = stack.back();
        const auto& inputs = impl->node->inputs;
        if (next < inputs.size()) {
            auto child = inputs[next++];
            if (child->node && visited.insert(child.get()).second) {
                stack.emplace_back(std::move(child), 0);
            }
            continue;
        }
        order.emplace_back(impl);
        stack.pop_back();
    }
    return order;
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ShapeError("backward() requires a scalar loss, got shape " +
                         (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
    }
    if (!loss.requires_grad()) {
        throw Error("backward() on a loss that is not connected to any tensor requiring grad");
    }
    std::vector<Tensor> order = topological_order(loss);
    Tensor root = loss;
    auto seed = root.mutable_grad();
    seed[0] += 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto& impl = *it->impl();
        if (!impl.grad.empty()) {
            impl.node->backward(impl.grad);
        }
    }
    // Graph records live for one forward/backward pass.
    for (auto& t : order) {
        t.impl()->node.reset();
    }
}

namespace detail {

Tensor make_result(Shape shape, std::vector<float> data, std::vector<Tensor> inputs, BackwardFn fn) {
    bool needs = false;
    if (t_grad_enabled) {
        for (const auto& in : inputs) {
            needs = needs || in.requires_grad();
        }
    }
    auto impl = make_impl(std::move(shape), std::move(data), needs);
    if (needs) {
        auto node = std::make_shared<Node>();
        node->inputs.reserve(inputs.size());
        for (const auto& in : inputs) {
            node->inputs.push_back(in.impl());
        }
        node->backward = std::move(fn);
        impl->node = std::move(node);
    }
    return Tensor(std::move(impl));
}

std::span<float> grad_sink(const Tensor& t) {
    auto& impl = *t.impl();
    if (!impl.requires_grad) {
        return {};
    }
    if (impl.grad.empty()) {
        impl.grad.assign(impl.data.size(), 0.0f);
    }
    return impl.grad;
}

} // namespace detail

} // namespace aitd
