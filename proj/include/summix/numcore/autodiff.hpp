// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_NUMCORE_AUTODIFF_HPP
#define SUMMIX_NUMCORE_AUTODIFF_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "summix/numcore/tensor.hpp"

namespace summix {

template <typename T>
class GradientMap {
public:
    GradientMap(std::vector<const Node<T>*> keys, std::vector<std::vector<T>> grads)
        : keys_(std::move(keys)), grads_(std::move(grads)) {}

    const std::vector<T>& operator[](const Tensor<T>& t) const {
        for (std::size_t i = 0; i < keys_.size(); ++i)
            if (keys_[i] == t.node()) return grads_[i];
        throw GradientError("GradientMap: tensor was not requested");
    }
    const std::vector<T>& at(std::size_t i) const { return grads_.at(i); }
    std::size_t size() const { return grads_.size(); }

private:
    std::vector<const Node<T>*> keys_;
    std::vector<std::vector<T>> grads_;
};

// d(output)/d(t) for every t in `wrt`. Existing leaf gradients are preserved.
template <typename T>
GradientMap<T> forward_backward(const Tensor<T>& output, const std::vector<Tensor<T>>& wrt) {
    if (output.numel() != 1) {
        throw GradientError("forward_backward: output must be a scalar, got shape " + shape_str(output.shape()));
    }
    std::unordered_set<const Node<T>*> in_graph;
    std::vector<Node<T>*> leaves;
    if (output.requires_grad()) {
        for (Node<T>* n : detail::topological_order(output.node())) {
            in_graph.insert(n);
            if (!n->backward) leaves.push_back(n);
        }
    }
    for (std::size_t i = 0; i < wrt.size(); ++i) {
        if (!wrt[i].requires_grad() || !in_graph.count(wrt[i].node())) {
            throw GradientError("forward_backward: no gradient path from the output to requested tensor #" +
                                std::to_string(i) + " " + shape_str(wrt[i].shape()));
        }
    }
    std::vector<std::vector<T>> stash;
    stash.reserve(leaves.size());
    for (Node<T>* n : leaves) stash.push_back(std::exchange(n->grad, {}));
    backward(output);
    std::vector<const Node<T>*> keys;
    std::vector<std::vector<T>> grads;
    for (const auto& t : wrt) {
        keys.push_back(t.node());
        auto g = t.node()->grad;
        if (g.size() != t.numel()) g.assign(t.numel(), T(0));
        grads.push_back(std::move(g));
    }
    for (std::size_t i = 0; i < leaves.size(); ++i) leaves[i]->grad = std::move(stash[i]);
    return GradientMap<T>(std::move(keys), std::move(grads));
}

struct GradcheckReport {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

using NamedTensor = std::pair<std::string, Tensor<double>>;

// Compares reverse-mode gradients of the scalar `fn()` against central
// differences for every element of every parameter.
inline GradcheckReport gradcheck_report(const std::function<Tensor<double>()>& fn, std::vector<NamedTensor> params,
                                        double epsilon = 1e-5) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("gradcheck: epsilon must be positive");
    for (auto& [name, t] : params) t.set_requires_grad(true);
    auto out = fn();
    std::vector<Tensor<double>> wrt;
    for (auto& p : params) wrt.push_back(p.second);
    GradcheckReport report;
    std::vector<std::vector<double>> analytic;
    if (out.requires_grad()) {
        auto gm = forward_backward(out, wrt);
        for (std::size_t i = 0; i < gm.size(); ++i) analytic.push_back(gm.at(i));
    } else {
        // Constant function: every analytic gradient is zero.
        for (auto& p : params) analytic.emplace_back(p.second.numel(), 0.0);
    }
    NoGradGuard guard;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& [name, t] = params[pi];
        auto data = t.mutable_data();
        for (std::size_t e = 0; e < data.size(); ++e) {
            const double saved = data[e];
            data[e] = saved + epsilon;
            const double fp = fn().item();
            data[e] = saved - epsilon;
            const double fm = fn().item();
            data[e] = saved;
            if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(analytic[pi][e])) {
                throw GradientError("gradcheck: non-finite value while probing parameter '" + name + "' element " +
                                    std::to_string(e));
            }
            const double numeric = (fp - fm) / (2.0 * epsilon);
            const double a = analytic[pi][e];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > report.max_relative_error || report.worst_parameter.empty()) {
                report.max_relative_error = rel;
                report.worst_parameter = name;
                report.worst_index = e;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    return report;
}

inline double gradcheck(const std::function<Tensor<double>()>& fn, std::vector<NamedTensor> params,
                        double epsilon = 1e-5) {
    return gradcheck_report(fn, std::move(params), epsilon).max_relative_error;
}

} // namespace summix

#endif
