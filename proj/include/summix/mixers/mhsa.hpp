// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_MIXERS_MHSA_HPP
#define SUMMIX_MIXERS_MHSA_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "summix/mixers/sequence_batch.hpp"
#include "summix/numcore/ops.hpp"
#include "summix/numcore/params.hpp"

namespace summix {

template <typename T>
struct MhsaParams {
    using value_type = T;
    LinearParams<T> q, k, v, o;
    std::size_t n_heads = 8;

    MhsaParams() = default;
    MhsaParams(std::size_t d, std::size_t heads, RandomStream& rng)
        : q(d, d, rng), k(d, d, rng), v(d, d, rng), o(d, d, rng), n_heads(heads) {
        if (heads == 0 || d % heads != 0) {
            throw std::invalid_argument("MhsaParams: width " + std::to_string(d) + " not divisible by " +
                                        std::to_string(heads) + " heads");
        }
    }

    std::size_t width() const { return q.in_features(); }

    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        q.visit(join_name(prefix, "q"), fn);
        k.visit(join_name(prefix, "k"), fn);
        v.visit(join_name(prefix, "v"), fn);
        o.visit(join_name(prefix, "o"), fn);
    }
};

// Scaled dot-product attention with padded keys excluded. `probs_out`
// receives the [B, H, T, T] attention weights when given.
template <typename T>
SequenceBatch<T> mhsa_forward(const SequenceBatch<T>& x, const MhsaParams<T>& p, std::vector<T>* probs_out = nullptr) {
    if (x.width() != p.width()) {
        throw ShapeError("mhsa_forward: input width " + std::to_string(x.width()) + " but block expects " +
                         std::to_string(p.width()));
    }
    auto q = ops::linear(x.values, p.q.w, p.q.b);
    auto k = ops::linear(x.values, p.k.w, p.k.b);
    auto v = ops::linear(x.values, p.v.w, p.v.b);
    auto a = ops::attention(q, k, v, x.mask, p.n_heads, probs_out);
    return x.with_values(ops::linear(a, p.o.w, p.o.b));
}

} // namespace summix

#endif
