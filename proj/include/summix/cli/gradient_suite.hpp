// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_CLI_GRADIENT_SUITE_HPP
#define SUMMIX_CLI_GRADIENT_SUITE_HPP

#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "summix/conformer/layer.hpp"
#include "summix/numcore/autodiff.hpp"
#include "summix/ssl/losses.hpp"
#include "summix/ssl/quantizer.hpp"

// Finite-difference checks of every differentiable block on small 64-bit
// instances (T <= 6, D <= 8).
namespace summix::gradient_suite {

struct Entry {
    std::string name;
    GradcheckReport report;
    std::size_t elements = 0;
};

inline constexpr double kTolerance = 1e-4;

template <typename P>
std::vector<NamedTensor> named(P& p, const std::set<std::string>& skip = {}) {
    std::vector<NamedTensor> out;
    p.visit("", [&](const std::string& n, Tensor<double>& t) {
        if (!skip.count(n)) out.emplace_back(n, t);
    });
    return out;
}

// Fixed random projection of the valid frames to a scalar.
inline Tensor<double> projection_loss(const SequenceBatch<double>& y) {
    RandomStream r(123);
    return ops::sum(ops::mul(ops::zero_masked(y.values, y.mask), Tensor<double>::uniform(y.values.shape(), -1, 1, r)));
}

inline std::vector<Entry> run(std::uint64_t seed = 0) {
    using TD = Tensor<double>;
    using SB = SequenceBatch<double>;
    std::vector<Entry> out;
    auto check = [&](const std::string& name, const std::function<TD()>& fn, std::vector<NamedTensor> ps) {
        std::size_t n = 0;
        for (const auto& p : ps) n += p.second.numel();
        out.push_back({name, gradcheck_report(fn, std::move(ps)), n});
    };
    const FrameMask mask{1, 1, 1, 0};
    RandomStream rng(seed);

    {
        SummaryMixingParams<double> p(SummaryMixingDims{6, 6, 6, 6, 6, 6, 2}, rng);
        auto x = TD::normal({1, 4, 6}, 1.0, rng);
        auto ps = named(p);
        ps.emplace_back("x", x);
        check("summary_mixing", [&] { return projection_loss(summary_mixing_forward(SB(x, mask), p)); }, ps);
    }
    {
        // The key bias shifts every score of a row equally and the softmax
        // cancels it, so its gradient is exactly zero; it is left out.
        MhsaParams<double> p(6, 2, rng);
        auto x = TD::normal({1, 4, 6}, 1.0, rng);
        auto ps = named(p, {"k.b"});
        ps.emplace_back("x", x);
        check("mhsa", [&] { return projection_loss(mhsa_forward(SB(x, mask), p)); }, ps);
    }
    {
        ConvModuleParams<double> p(6, 5, rng);
        auto x = TD::normal({1, 4, 6}, 1.0, rng);
        auto ps = named(p);
        ps.emplace_back("x", x);
        check("conv_module", [&] { return projection_loss(convolution_module(SB(x, mask), p)); }, ps);
    }
    for (auto kind : {MixerKind::summary_mixing, MixerKind::mhsa}) {
        EncoderConfig c;
        c.n_layers = 1;
        c.d_model = 8;
        c.mlp_hidden = 16;
        c.conv_kernel = 5;
        c.n_heads = 2;
        c.input_dim = 8;
        c.mixer_kind = kind;
        ConformerLayerParams<double> p(c, rng);
        auto x = TD::normal({1, 4, 8}, 1.0, rng);
        auto ps = named(p, {"mixer.k.b"});
        ps.emplace_back("x", x);
        check("conformer_layer." + to_string(kind), [&] { return projection_loss(conformer_layer_forward(SB(x, mask), p, kind)); },
              ps);
    }
    {
        auto c = TD::normal({6, 8}, 1.0, rng), q = TD::normal({6, 8}, 1.0, rng);
        const RandomStream draw(seed + 3);
        check("contrastive", [&] {
            RandomStream r = draw;  // identical distractors on every evaluation
            return ssl::contrastive_loss(c, q, {{0, 1, 2, 3}, {4, 5}}, 3, 0.1, r).loss;
        }, {{"c", c}, {"q", q}});
    }
    {
        auto logits = TD::normal({2, 4}, 1.0, rng);
        check("diversity", [&] { return ssl::diversity_loss(ops::softmax(logits)); }, {{"logits", logits}});
    }
    {
        SslHeadConfig h;
        h.groups = 2;
        h.entries = 3;
        h.codeword_dim = 4;
        ssl::QuantizerParams<double> q(4, h, rng);
        auto x = TD::normal({5, 4}, 1.0, rng);
        std::vector<double> noise(5 * 6);
        for (auto& e : noise) e = rng.gumbel();
        auto probe = TD::uniform({5, 4}, -1, 1, rng);
        check("quantizer_soft", [&] {
            ssl::QuantizeOptions o;
            o.tau = 0.8;
            o.noise = &noise;
            o.straight_through = false;
            auto r = ssl::quantize(x, q, o);
            return ops::add(ops::sum(ops::mul(r.targets, probe)), ssl::diversity_loss(r.avg_probs));
        }, {{"x", x}, {"weight_proj.w", q.weight_proj.w}, {"weight_proj.b", q.weight_proj.b}, {"codebook", q.codebook}});
    }
    return out;
}

inline bool all_pass(const std::vector<Entry>& es) {
    for (const auto& e : es)
        if (!(e.report.max_relative_error < kTolerance)) return false;
    return true;
}

inline nlohmann::json to_json(const std::vector<Entry>& es) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : es) {
        j.push_back({{"block", e.name},
                     {"max_relative_error", e.report.max_relative_error},
                     {"worst_parameter", e.report.worst_parameter},
                     {"elements", e.elements},
                     {"pass", e.report.max_relative_error < kTolerance}});
    }
    return j;
}

} // namespace summix::gradient_suite

#endif
