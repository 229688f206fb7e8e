// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_SSL_QUANTIZER_HPP
#define SUMMIX_SSL_QUANTIZER_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "summix/conformer/config.hpp"
#include "summix/numcore/ops.hpp"
#include "summix/numcore/params.hpp"

namespace summix::ssl {

// G groups of V codewords, each of width codeword_dim / G.
template <typename T>
struct QuantizerParams {
    using value_type = T;
    LinearParams<T> weight_proj;  // latent -> G*V logits
    Tensor<T> codebook;           // [G, V, codeword_dim / G]

    QuantizerParams() = default;
    QuantizerParams(std::size_t in, const SslHeadConfig& h, RandomStream& rng)
        : weight_proj(in, h.groups * h.entries, rng),
          codebook(Tensor<T>::uniform({h.groups, h.entries, h.codeword_dim / h.groups}, T(0), T(1), rng, true)) {
        h.validate();
        // Unit-variance logit weights and a zero bias, as in the reference
        // w2v2 quantizer: initial code choices are sharp per frame.
        weight_proj.w = Tensor<T>::normal(weight_proj.w.shape(), T(1), rng, true);
        weight_proj.b = Tensor<T>::zeros(weight_proj.b.shape(), true);
    }

    std::size_t groups() const { return codebook.dim(0); }
    std::size_t entries() const { return codebook.dim(1); }
    std::size_t codeword_dim() const { return codebook.dim(0) * codebook.dim(2); }

    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        weight_proj.visit(join_name(prefix, "weight_proj"), fn);
        fn(join_name(prefix, "codebook"), codebook);
    }
};

struct QuantizeOptions {
    bool training = true;
    double tau = 2.0;
    RandomStream* rng = nullptr;
    // Fixed Gumbel noise [N*G*V] used instead of drawing from `rng`.
    const std::vector<double>* noise = nullptr;
    // Off: the soft probabilities select a blend of codewords (the
    // differentiable path the straight-through estimator backpropagates through).
    bool straight_through = true;
};

template <typename T>
struct QuantizeResult {
    Tensor<T> targets;    // [N, codeword_dim]
    Tensor<T> soft;       // [N, G*V]; Gumbel-softmax in training, plain softmax in eval
    Tensor<T> avg_probs;  // [G, V], noise-free softmax averaged over the N rows
    std::vector<double> perplexity;  // per group, exp(H(avg_probs[g]))
    std::vector<std::size_t> codes;  // [N*G] selected entry per row and group

    double mean_perplexity() const {
        double s = 0;
        for (double p : perplexity) s += p;
        return perplexity.empty() ? 0.0 : s / static_cast<double>(perplexity.size());
    }
};

inline double entropy(std::span<const double> p) {
    double h = 0;
    for (double v : p)
        if (v > 0) h -= v * std::log(v);
    return h;
}

// x[N, C] -> quantized targets.
template <typename T>
QuantizeResult<T> quantize(const Tensor<T>& x, const QuantizerParams<T>& q, const QuantizeOptions& opt) {
    if (!(opt.tau > 0.0)) throw std::invalid_argument("quantize: Gumbel temperature must be positive");
    if (x.rank() != 2 || x.dim(1) != q.weight_proj.in_features()) {
        throw ShapeError("quantize: latents " + shape_str(x.shape()) + " do not match a projection from width " +
                         std::to_string(q.weight_proj.in_features()));
    }
    const std::size_t n = x.dim(0), g = q.groups(), v = q.entries();
    auto logits = ops::linear(x, q.weight_proj.w, q.weight_proj.b);

    QuantizeResult<T> r;
    r.avg_probs = ops::mean_leading(ops::softmax(ops::reshape(logits, {n, g, v})));
    r.perplexity.resize(g);
    for (std::size_t k = 0; k < g; ++k) {
        std::vector<double> p(v);
        for (std::size_t j = 0; j < v; ++j) p[j] = static_cast<double>(r.avg_probs[k * v + j]);
        r.perplexity[k] = std::exp(entropy(p));
    }

    Tensor<T> select;
    if (opt.training) {
        std::vector<T> noise(n * g * v);
        if (opt.noise) {
            if (opt.noise->size() != noise.size()) throw std::invalid_argument("quantize: fixed noise has the wrong length");
            for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = static_cast<T>((*opt.noise)[i]);
        } else {
            if (!opt.rng) throw std::logic_error("quantize: training mode needs a random stream");
            for (auto& e : noise) e = static_cast<T>(opt.rng->gumbel());
        }
        auto perturbed = ops::scale(ops::add(logits, Tensor<T>({n, g * v}, std::move(noise))), T(1.0 / opt.tau));
        r.soft = ops::reshape(ops::softmax(ops::reshape(perturbed, {n, g, v})), {n, g * v});
        select = opt.straight_through ? ops::straight_through_onehot(r.soft, g) : r.soft;
    } else {
        r.soft = ops::reshape(ops::softmax(ops::reshape(logits, {n, g, v})), {n, g * v});
        std::vector<T> hard(n * g * v, T(0));
        const auto& lv = logits.values();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < g; ++k) {
                const T* row = lv.data() + (i * g + k) * v;
                hard[(i * g + k) * v + static_cast<std::size_t>(std::max_element(row, row + v) - row)] = T(1);
            }
        select = Tensor<T>({n, g * v}, std::move(hard));
    }

    r.codes.resize(n * g);
    const auto& sv = select.values();
    for (std::size_t i = 0; i < n * g; ++i) {
        const T* row = sv.data() + i * v;
        r.codes[i] = static_cast<std::size_t>(std::max_element(row, row + v) - row);
    }
    // Per-group selection of codebook rows, concatenated across groups.
    r.targets = ops::grouped_linear(select, q.codebook, Tensor<T>::zeros({q.codeword_dim()}));
    return r;
}

} // namespace summix::ssl

#endif
