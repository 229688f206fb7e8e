// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_CONFORMER_ENCODER_HPP
#define SUMMIX_CONFORMER_ENCODER_HPP

#include <cmath>
#include <vector>

#include "summix/conformer/layer.hpp"

namespace summix {

// Encoder input followed by every layer output; L + 1 entries.
template <typename T>
using LayerOutputs = std::vector<SequenceBatch<T>>;

template <typename T>
struct EncoderParams {
    using value_type = T;
    LinearParams<T> input_proj;
    std::vector<ConformerLayerParams<T>> layers;

    EncoderParams() = default;
    EncoderParams(const EncoderConfig& cfg, RandomStream& rng) : input_proj(cfg.input_dim, cfg.d_model, rng) {
        cfg.validate();
        for (std::size_t l = 0; l < cfg.n_layers; ++l) layers.emplace_back(cfg, rng);
    }

    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        input_proj.visit(join_name(prefix, "input_proj"), fn);
        for (std::size_t l = 0; l < layers.size(); ++l) layers[l].visit(join_name(prefix, "layer" + std::to_string(l)), fn);
    }
};

// Absolute sinusoidal positions [T, D]: sin on even columns, cos on odd.
template <typename T>
Tensor<T> sinusoidal_positions(std::size_t frames, std::size_t d) {
    std::vector<T> pe(frames * d);
    for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t j = 0; j < d; ++j) {
            const double rate = std::pow(10000.0, -static_cast<double>(j - j % 2) / static_cast<double>(d));
            const double a = static_cast<double>(t) * rate;
            pe[t * d + j] = static_cast<T>(j % 2 == 0 ? std::sin(a) : std::cos(a));
        }
    return Tensor<T>({frames, d}, std::move(pe));
}

// Input projection (plus sinusoidal positions for the attention baseline),
// i.e. entry 0 of the layer outputs.
template <typename T>
SequenceBatch<T> encoder_input(const SequenceBatch<T>& latents, const EncoderConfig& cfg, const EncoderParams<T>& p) {
    if (latents.width() != cfg.input_dim || p.input_proj.in_features() != cfg.input_dim) {
        throw ShapeError("encoder_forward: latent width " + std::to_string(latents.width()) + " does not match input_dim " +
                         std::to_string(cfg.input_dim));
    }
    auto x = ops::linear(latents.values, p.input_proj.w, p.input_proj.b);
    if (cfg.mixer_kind == MixerKind::mhsa) x = ops::add(x, sinusoidal_positions<T>(latents.frames(), cfg.d_model));
    return latents.with_values(std::move(x));
}

template <typename T>
LayerOutputs<T> encoder_forward(const SequenceBatch<T>& latents, const EncoderConfig& cfg, const EncoderParams<T>& p,
                                const ForwardContext& ctx = {}) {
    cfg.validate();
    if (p.layers.size() != cfg.n_layers) {
        throw ConfigError("encoder_forward: config has " + std::to_string(cfg.n_layers) + " layers, parameters have " +
                          std::to_string(p.layers.size()));
    }
    LayerOutputs<T> outs;
    outs.reserve(cfg.n_layers + 1);
    outs.push_back(encoder_input(latents, cfg, p));
    for (const auto& layer : p.layers) outs.push_back(conformer_layer_forward(outs.back(), layer, cfg.mixer_kind, ctx));
    return outs;
}

} // namespace summix

#endif
