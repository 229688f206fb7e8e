// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_CONFORMER_LAYER_HPP
#define SUMMIX_CONFORMER_LAYER_HPP

#include <string>

#include "summix/conformer/config.hpp"
#include "summix/mixers/mixer.hpp"
#include "summix/numcore/ops.hpp"
#include "summix/numcore/params.hpp"

namespace summix {

// Training mode turns dropout on; `rng` must then be set.
struct ForwardContext {
    bool training = false;
    double dropout = 0.0;
    RandomStream* rng = nullptr;

    template <typename T>
    Tensor<T> drop(const Tensor<T>& x) const {
        if (!training || dropout <= 0.0) return x;
        if (!rng) throw std::logic_error("ForwardContext: training with dropout needs a random stream");
        return ops::dropout(x, dropout, *rng);
    }
};

template <typename T>
struct FeedForwardParams {
    using value_type = T;
    NormParams<T> norm;
    LinearParams<T> up, down;

    FeedForwardParams() = default;
    FeedForwardParams(std::size_t d, std::size_t hidden, RandomStream& rng)
        : norm(d), up(d, hidden, rng), down(hidden, d, rng) {}

    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        norm.visit(join_name(prefix, "norm"), fn);
        up.visit(join_name(prefix, "up"), fn);
        down.visit(join_name(prefix, "down"), fn);
    }
};

// LN -> Linear -> swish -> dropout -> Linear -> dropout. Residual not included.
template <typename T>
Tensor<T> feed_forward(const Tensor<T>& x, const FeedForwardParams<T>& p, const ForwardContext& ctx) {
    auto h = ops::layer_norm(x, p.norm.gamma, p.norm.beta);
    h = ctx.drop(ops::swish(ops::linear(h, p.up.w, p.up.b)));
    return ctx.drop(ops::linear(h, p.down.w, p.down.b));
}

template <typename T>
struct ConvModuleParams {
    using value_type = T;
    NormParams<T> norm;
    LinearParams<T> pw1;  // D -> 2D, halves gated by GLU
    Tensor<T> dw_w;       // [K, D]
    Tensor<T> dw_b;       // [D]
    NormParams<T> dw_norm;
    LinearParams<T> pw2;

    ConvModuleParams() = default;
    ConvModuleParams(std::size_t d, std::size_t kernel, RandomStream& rng)
        : norm(d), pw1(d, 2 * d, rng), dw_w(init_fan_in<T>({kernel, d}, kernel, rng)),
          dw_b(init_fan_in<T>({d}, kernel, rng)), dw_norm(d), pw2(d, d, rng) {}

    std::size_t width() const { return dw_b.numel(); }

    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        norm.visit(join_name(prefix, "norm"), fn);
        pw1.visit(join_name(prefix, "pw1"), fn);
        fn(join_name(prefix, "dw.w"), dw_w);
        fn(join_name(prefix, "dw.b"), dw_b);
        dw_norm.visit(join_name(prefix, "dw_norm"), fn);
        pw2.visit(join_name(prefix, "pw2"), fn);
    }
};

// LN -> pointwise (D -> 2D) -> GLU -> depthwise conv, with padding frames
// zeroed just before the depthwise step so they cannot leak into neighbours.
template <typename T>
Tensor<T> conv_module_depthwise(const SequenceBatch<T>& x, const ConvModuleParams<T>& p) {
    auto h = ops::layer_norm(x.values, p.norm.gamma, p.norm.beta);
    h = ops::glu(ops::linear(h, p.pw1.w, p.pw1.b));
    h = ops::zero_masked(h, x.mask);
    return ops::depthwise_conv1d(h, p.dw_w, p.dw_b);
}

// Full convolution block including its residual connection.
template <typename T>
SequenceBatch<T> convolution_module(const SequenceBatch<T>& x, const ConvModuleParams<T>& p,
                                    const ForwardContext& ctx = {}) {
    if (x.width() != p.width()) {
        throw ShapeError("convolution_module: width " + std::to_string(x.width()) + " but module expects " +
                         std::to_string(p.width()));
    }
    auto h = conv_module_depthwise(x, p);
    h = ops::swish(ops::layer_norm(h, p.dw_norm.gamma, p.dw_norm.beta));
    h = ctx.drop(ops::linear(h, p.pw2.w, p.pw2.b));
    return x.with_values(ops::add(x.values, h));
}

template <typename T>
struct ConformerLayerParams {
    using value_type = T;
    FeedForwardParams<T> ffn1;
    NormParams<T> mixer_norm;
    MixerParams<T> mixer;
    ConvModuleParams<T> conv;
    FeedForwardParams<T> ffn2;
    NormParams<T> final_norm;

    ConformerLayerParams() = default;
    ConformerLayerParams(const EncoderConfig& cfg, RandomStream& rng)
        : ffn1(cfg.d_model, cfg.mlp_hidden, rng), mixer_norm(cfg.d_model),
          mixer(make_mixer(cfg, rng)), conv(cfg.d_model, cfg.conv_kernel, rng),
          ffn2(cfg.d_model, cfg.mlp_hidden, rng), final_norm(cfg.d_model) {}

    static MixerParams<T> make_mixer(const EncoderConfig& cfg, RandomStream& rng) {
        if (cfg.mixer_kind == MixerKind::mhsa) return {MhsaParams<T>(cfg.d_model, cfg.n_heads, rng)};
        return {SummaryMixingParams<T>(cfg.summary_dims(), rng)};
    }

    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        ffn1.visit(join_name(prefix, "ffn1"), fn);
        mixer_norm.visit(join_name(prefix, "mixer_norm"), fn);
        mixer.visit(join_name(prefix, "mixer"), fn);
        conv.visit(join_name(prefix, "conv"), fn);
        ffn2.visit(join_name(prefix, "ffn2"), fn);
        final_norm.visit(join_name(prefix, "final_norm"), fn);
    }
};

// Pre-norm Conformer layer (macaron): x + FFN/2, + mixer, + conv module,
// + FFN/2, then a final LayerNorm.
template <typename T>
SequenceBatch<T> conformer_layer_forward(const SequenceBatch<T>& x, const ConformerLayerParams<T>& p, MixerKind kind,
                                         const ForwardContext& ctx = {}) {
    const T half = T(0.5);
    auto h = ops::add(x.values, ops::scale(feed_forward(x.values, p.ffn1, ctx), half));
    auto normed = x.with_values(ops::layer_norm(h, p.mixer_norm.gamma, p.mixer_norm.beta));
    h = ops::add(h, ctx.drop(mixer_forward(normed, p.mixer, kind).values));
    h = convolution_module(x.with_values(h), p.conv, ctx).values;
    h = ops::add(h, ops::scale(feed_forward(h, p.ffn2, ctx), half));
    return x.with_values(ops::layer_norm(h, p.final_norm.gamma, p.final_norm.beta));
}

} // namespace summix

#endif
