// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_NUMCORE_PARAMS_HPP
#define SUMMIX_NUMCORE_PARAMS_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "summix/numcore/random.hpp"
#include "summix/numcore/tensor.hpp"

namespace summix {

// Parameter structs expose `visit(prefix, fn)` calling fn(name, tensor) for
// every trainable tensor in a fixed order. Counting, checkpoints and the
// optimizer are all built on it.
template <typename T>
using ParamVisitor = std::function<void(const std::string&, Tensor<T>&)>;

inline std::string join_name(const std::string& prefix, const std::string& name) {
    return prefix.empty() ? name : prefix + "." + name;
}

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual dense-layer initialization.
template <typename T>
Tensor<T> init_fan_in(Shape shape, std::size_t fan_in, RandomStream& rng) {
    const T a = T(1) / std::sqrt(static_cast<T>(fan_in));
    return Tensor<T>::uniform(std::move(shape), -a, a, rng, true);
}

template <typename P>
std::size_t count_elements(P& params) {
    using T = typename P::value_type;
    std::size_t n = 0;
    params.visit("", [&](const std::string&, Tensor<T>& t) { n += t.numel(); });
    return n;
}

template <typename P>
std::vector<std::pair<std::string, Tensor<typename P::value_type>>> named_parameters(P& params) {
    using T = typename P::value_type;
    std::vector<std::pair<std::string, Tensor<T>>> out;
    params.visit("", [&](const std::string& n, Tensor<T>& t) { out.emplace_back(n, t); });
    return out;
}

// Flat copy of every parameter value, for bitwise before/after comparisons.
template <typename P>
std::vector<typename P::value_type> snapshot(P& params) {
    using T = typename P::value_type;
    std::vector<T> out;
    params.visit("", [&](const std::string&, Tensor<T>& t) { out.insert(out.end(), t.values().begin(), t.values().end()); });
    return out;
}

// Linear layer weights stored as w[in, out] and b[out].
template <typename T>
struct LinearParams {
    using value_type = T;
    Tensor<T> w;
    Tensor<T> b;

    LinearParams() = default;
    LinearParams(std::size_t in, std::size_t out, RandomStream& rng)
        : w(init_fan_in<T>({in, out}, in, rng)), b(init_fan_in<T>({out}, in, rng)) {}

    std::size_t in_features() const { return w.dim(0); }
    std::size_t out_features() const { return w.dim(1); }

    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        fn(join_name(prefix, "w"), w);
        fn(join_name(prefix, "b"), b);
    }
};

template <typename T>
struct NormParams {
    using value_type = T;
    Tensor<T> gamma;
    Tensor<T> beta;

    NormParams() = default;
    explicit NormParams(std::size_t d) : gamma(Tensor<T>::full({d}, T(1), true)), beta(Tensor<T>::zeros({d}, true)) {}

    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        fn(join_name(prefix, "gamma"), gamma);
        fn(join_name(prefix, "beta"), beta);
    }
};

} // namespace summix

#endif
