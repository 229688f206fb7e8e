// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_MIXERS_SUMMARY_MIXING_HPP
#define SUMMIX_MIXERS_SUMMARY_MIXING_HPP

#include <stdexcept>
#include <string>

#include "summix/mixers/sequence_batch.hpp"
#include "summix/numcore/ops.hpp"
#include "summix/numcore/params.hpp"

namespace summix {

// One-hidden-layer GELU network applied independently to `groups` slices of
// the last axis. groups = 1 is an ordinary MLP.
template <typename T>
struct GroupedMlpParams {
    using value_type = T;
    Tensor<T> w1, b1, w2, b2;  // w1[G, in, hid], b1[G*hid], w2[G, hid, out], b2[G*out]

    GroupedMlpParams() = default;
    GroupedMlpParams(std::size_t in, std::size_t hidden, std::size_t out, std::size_t groups, RandomStream& rng) {
        if (groups == 0 || in % groups || hidden % groups || out % groups) {
            throw std::invalid_argument("GroupedMlp: widths " + std::to_string(in) + "/" + std::to_string(hidden) + "/" +
                                        std::to_string(out) + " not divisible by " + std::to_string(groups) + " heads");
        }
        const std::size_t gi = in / groups, gh = hidden / groups, go = out / groups;
        w1 = init_fan_in<T>({groups, gi, gh}, gi, rng);
        b1 = init_fan_in<T>({hidden}, gi, rng);
        w2 = init_fan_in<T>({groups, gh, go}, gh, rng);
        b2 = init_fan_in<T>({out}, gh, rng);
    }

    std::size_t groups() const { return w1.dim(0); }
    std::size_t in_features() const { return w1.dim(0) * w1.dim(1); }
    std::size_t out_features() const { return w2.dim(0) * w2.dim(2); }

    Tensor<T> operator()(const Tensor<T>& x) const {
        return ops::grouped_linear(ops::gelu(ops::grouped_linear(x, w1, b1)), w2, b2);
    }

    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        fn(join_name(prefix, "w1"), w1);
        fn(join_name(prefix, "b1"), b1);
        fn(join_name(prefix, "w2"), w2);
        fn(join_name(prefix, "b2"), b2);
    }
};

struct SummaryMixingDims {
    std::size_t d_in = 768;       // D
    std::size_t d_summary = 768;  // D''
    std::size_t d_out = 768;      // D'
    std::size_t s_hidden = 768;
    std::size_t f_hidden = 768;
    std::size_t c_hidden = 768;
    std::size_t n_heads = 1;
};

// s and f see per-head slices of x; c sees the full concatenation.
template <typename T>
struct SummaryMixingParams {
    using value_type = T;
    GroupedMlpParams<T> s, f, c;

    SummaryMixingParams() = default;
    SummaryMixingParams(const SummaryMixingDims& d, RandomStream& rng)
        : s(d.d_in, d.s_hidden, d.d_summary, d.n_heads, rng),
          f(d.d_in, d.f_hidden, d.d_summary, d.n_heads, rng),
          c(2 * d.d_summary, d.c_hidden, d.d_out, 1, rng) {}

    std::size_t n_heads() const { return s.groups(); }
    std::size_t d_in() const { return s.in_features(); }
    std::size_t d_summary() const { return s.out_features(); }
    std::size_t d_out() const { return c.out_features(); }

    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        s.visit(join_name(prefix, "s"), fn);
        f.visit(join_name(prefix, "f"), fn);
        c.visit(join_name(prefix, "c"), fn);
    }
};

// s-bar = mean over valid frames of s(x_t); h_t = c([f(x_t), s-bar]).
// With several heads, head i averages its own slice of s and the slices are
// concatenated, which is the same as one average over the concatenation.
template <typename T>
SequenceBatch<T> summary_mixing_forward(const SequenceBatch<T>& x, const SummaryMixingParams<T>& p) {
    if (x.width() != p.d_in()) {
        throw ShapeError("summary_mixing_forward: input width " + std::to_string(x.width()) + " but block expects " +
                         std::to_string(p.d_in()));
    }
    auto local = p.f(x.values);
    auto summary = ops::masked_time_average(p.s(x.values), x.mask);
    auto h = p.c(ops::concat_last<T>({local, ops::repeat_time(summary, x.frames())}));
    return x.with_values(std::move(h));
}

template <typename T>
SequenceBatch<T> multihead_summary_mixing(const SequenceBatch<T>& x, const SummaryMixingParams<T>& p,
                                          std::size_t n_heads) {
    if (n_heads == 0 || p.d_summary() % n_heads != 0) {
        throw std::invalid_argument("multihead_summary_mixing: D''=" + std::to_string(p.d_summary()) +
                                    " not divisible by " + std::to_string(n_heads) + " heads");
    }
    if (p.n_heads() != n_heads) {
        throw std::invalid_argument("multihead_summary_mixing: parameters were built for " +
                                    std::to_string(p.n_heads()) + " heads");
    }
    return summary_mixing_forward(x, p);
}

// The s-bar vector alone, [B, D''].
template <typename T>
Tensor<T> summary_vector(const SequenceBatch<T>& x, const SummaryMixingParams<T>& p) {
    return ops::masked_time_average(p.s(x.values), x.mask);
}

} // namespace summix

#endif
