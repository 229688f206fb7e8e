// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_NUMCORE_TENSOR_HPP
#define SUMMIX_NUMCORE_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "summix/numcore/random.hpp"

namespace summix {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class GradientError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline bool& grad_enabled_flag() {
    thread_local bool enabled = true;
    return enabled;
}

inline std::size_t*& activation_sink() {
    thread_local std::size_t* sink = nullptr;
    return sink;
}

} // namespace detail

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

// Disables tape recording for the current thread while alive.
class NoGradGuard {
public:
    NoGradGuard() : previous_(detail::grad_enabled_flag()) { detail::grad_enabled_flag() = false; }
    ~NoGradGuard() { detail::grad_enabled_flag() = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

// Tallies every element produced by an op (outputs and buffers saved for the
// backward pass) on the current thread while alive.
class ActivationCounter {
public:
    ActivationCounter() : previous_(detail::activation_sink()) { detail::activation_sink() = &count_; }
    ~ActivationCounter() { detail::activation_sink() = previous_; }
    ActivationCounter(const ActivationCounter&) = delete;
    ActivationCounter& operator=(const ActivationCounter&) = delete;

    std::size_t count() const { return count_; }

private:
    std::size_t count_ = 0;
    std::size_t* previous_;
};

inline void record_activation(std::size_t elements) {
    if (auto* sink = detail::activation_sink()) *sink += elements;
}

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents.
    std::function<void(const std::vector<T>&)> backward;

    std::vector<T>& grad_buffer() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
        return grad;
    }
};

template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    Tensor(Shape shape, std::vector<T> values, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
        if (shape_numel(shape) != values.size()) {
            throw ShapeError("tensor: shape " + shape_str(shape) + " does not match " +
                             std::to_string(values.size()) + " values");
        }
        node_->shape = std::move(shape);
        node_->value = std::move(values);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        const auto n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
    }

    static Tensor full(Shape shape, T v, bool requires_grad = false) {
        const auto n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, v), requires_grad);
    }

    static Tensor scalar(T v, bool requires_grad = false) { return Tensor({}, {v}, requires_grad); }

    static Tensor uniform(Shape shape, T lo, T hi, RandomStream& rng, bool requires_grad = false) {
        std::vector<T> v(shape_numel(shape));
        for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
        return Tensor(std::move(shape), std::move(v), requires_grad);
    }

    static Tensor normal(Shape shape, T stddev, RandomStream& rng, bool requires_grad = false) {
        std::vector<T> v(shape_numel(shape));
        for (auto& x : v) x = static_cast<T>(stddev * rng.normal());
        return Tensor(std::move(shape), std::move(v), requires_grad);
    }

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t numel() const { return node_->value.size(); }

    std::span<const T> data() const { return node_->value; }
    const std::vector<T>& values() const { return node_->value; }
    // In-place access for parameter updates owned by a trainer.
    std::span<T> mutable_data() { return node_->value; }
    std::span<const T> grad() const { return node_->grad; }
    bool has_grad() const { return node_->grad.size() == node_->value.size(); }
    void zero_grad() { node_->grad.clear(); }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool r) { node_->requires_grad = r; }

    T item() const {
        if (numel() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
        return node_->value[0];
    }

    T operator[](std::size_t i) const { return node_->value[i]; }

    // Leaf copy that shares no graph history.
    Tensor detach() const { return Tensor(shape(), values(), false); }
    Tensor clone(bool requires_grad) const { return Tensor(shape(), values(), requires_grad); }

    Node<T>* node() const { return node_.get(); }
    const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

    // Builds an op result. The backward closure only runs when the result is
    // part of a recorded graph.
    template <typename Backward>
    static Tensor make_result(Shape shape, std::vector<T> value, std::initializer_list<Tensor> parents,
                              Backward&& backward) {
        return make_result(std::move(shape), std::move(value), std::vector<Tensor>(parents),
                           std::forward<Backward>(backward));
    }

    template <typename Backward>
    static Tensor make_result(Shape shape, std::vector<T> value, const std::vector<Tensor>& parents,
                              Backward&& backward) {
        Tensor out(std::move(shape), std::move(value), false);
        record_activation(out.numel());
        if (!grad_enabled()) return out;
        bool any = false;
        for (const auto& p : parents) any = any || p.requires_grad();
        if (!any) return out;
        out.node_->requires_grad = true;
        for (const auto& p : parents) out.node_->parents.push_back(p.node_);
        out.node_->backward = std::forward<Backward>(backward);
        return out;
    }

private:
    std::shared_ptr<Node<T>> node_;
};

// Accumulates `g` into the gradient of `t` when `t` participates in the graph.
template <typename T>
inline void accumulate_grad(const Tensor<T>& t, std::span<const T> g) {
    if (!t.requires_grad()) return;
    auto& buf = t.node()->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

template <typename T>
inline std::vector<T>* grad_target(const Tensor<T>& t) {
    return t.requires_grad() ? &t.node()->grad_buffer() : nullptr;
}

namespace detail {

template <typename T>
std::vector<Node<T>*> topological_order(Node<T>* root) {
    std::vector<Node<T>*> order;
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    std::unordered_set<Node<T>*> seen;
    auto mark = [&](Node<T>* n) { seen.insert(n); };
    auto is_seen = [&](Node<T>* n) { return seen.count(n) > 0; };
    stack.emplace_back(root, 0);
    mark(root);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node<T>* p = node->parents[idx++].get();
            if (p->requires_grad && !is_seen(p)) {
                mark(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order; // parents before children
}

} // namespace detail

// Reverse-mode sweep from a scalar. Leaf gradients accumulate; intermediate
// gradients are released afterwards.
template <typename T>
void backward(const Tensor<T>& output) {
    if (output.numel() != 1) {
        throw GradientError("backward: output must be a scalar, got shape " + shape_str(output.shape()));
    }
    if (!output.requires_grad()) throw GradientError("backward: output does not depend on any tensor requiring grad");
    auto order = detail::topological_order(output.node());
    output.node()->grad_buffer()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward && n->grad.size() == n->value.size()) n->backward(n->grad);
        if (n->backward) {
            n->grad.clear();
            n->grad.shrink_to_fit();
        }
    }
}

} // namespace summix

#endif
