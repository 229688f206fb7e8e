// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_CONFORMER_COUNT_HPP
#define SUMMIX_CONFORMER_COUNT_HPP

#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "summix/conformer/config.hpp"

namespace summix {

namespace param_count {

inline std::size_t linear(std::size_t in, std::size_t out) { return in * out + out; }
inline std::size_t norm(std::size_t d) { return 2 * d; }
inline std::size_t grouped_mlp(std::size_t in, std::size_t hidden, std::size_t out, std::size_t groups) {
    return (in / groups) * (hidden / groups) * groups + hidden + (hidden / groups) * (out / groups) * groups + out;
}

// The two linear maps of a half-step MLP; its pre-norm is counted with the
// other layer norms.
inline std::size_t feed_forward(const EncoderConfig& c) {
    return linear(c.d_model, c.mlp_hidden) + linear(c.mlp_hidden, c.d_model);
}
inline std::size_t mhsa(const EncoderConfig& c) { return 4 * linear(c.d_model, c.d_model); }
inline std::size_t summary_mixing(const EncoderConfig& c) {
    const auto d = c.summary_dims();
    return grouped_mlp(d.d_in, d.s_hidden, d.d_summary, d.n_heads) + grouped_mlp(d.d_in, d.f_hidden, d.d_summary, d.n_heads) +
           grouped_mlp(2 * d.d_summary, d.c_hidden, d.d_out, 1);
}
inline std::size_t mixer(const EncoderConfig& c) {
    return c.mixer_kind == MixerKind::mhsa ? mhsa(c) : summary_mixing(c);
}
inline std::size_t conv_module(const EncoderConfig& c) {
    const auto d = c.d_model;
    return norm(d) + linear(d, 2 * d) + c.conv_kernel * d + d + norm(d) + linear(d, d);
}
inline std::size_t layer(const EncoderConfig& c) {
    return 2 * feed_forward(c) + mixer(c) + conv_module(c) + 4 * norm(c.d_model);
}
inline std::size_t cnn(const frontend::Cnn1dConfig& c) {
    std::size_t n = 0, cin = c.in_features;
    for (auto k : c.kernel_sizes) {
        n += k * cin * c.channels + c.channels;
        cin = c.channels;
    }
    return n;
}

} // namespace param_count

struct ParamReport {
    MixerKind mixer_kind = MixerKind::summary_mixing;
    std::size_t n_layers = 0;
    std::vector<std::pair<std::string, std::size_t>> blocks;
    std::size_t per_layer = 0;
    std::size_t encoder = 0;
    std::size_t total = 0;

    std::size_t at(const std::string& name) const {
        for (const auto& [n, v] : blocks)
            if (n == name) return v;
        throw std::out_of_range("ParamReport: no block " + name);
    }

    nlohmann::json to_json() const {
        nlohmann::json b = nlohmann::json::object();
        for (const auto& [n, v] : blocks) b[n] = v;
        return {{"mixer_kind", to_string(mixer_kind)}, {"n_layers", n_layers}, {"blocks", b}, {"per_layer", per_layer}, {"encoder", encoder}, {"total", total}};
    }

    std::string to_text() const {
        std::string s = fmt::format("mixer: {}, layers: {} (blocks prefixed 'layer.' are per layer)\n", to_string(mixer_kind), n_layers);
        for (const auto& [n, v] : blocks) s += fmt::format("{:<28}{:>14}\n", n, v);
        s += fmt::format("{:<28}{:>14}\n", "encoder_total", encoder);
        s += fmt::format("{:<28}{:>14}  ({:.1f}M)\n", "total", total, static_cast<double>(total) / 1e6);
        return s;
    }
};

// Exact closed-form counts of every declared parameter tensor.
inline ParamReport count_params(const ModelConfig& cfg) {
    using namespace param_count;
    cfg.validate();
    const auto& e = cfg.encoder;
    const auto& h = cfg.heads;
    const std::size_t c = cfg.cnn.channels;
    ParamReport r;
    r.mixer_kind = e.mixer_kind;
    r.n_layers = e.n_layers;
    auto add = [&](const std::string& n, std::size_t v) { r.blocks.emplace_back(n, v); };
    add("frontend.cnn", cnn(cfg.cnn));
    add("frontend.feature_norm", norm(c));
    add("encoder.input_proj", linear(e.input_dim, e.d_model));
    add("layer.ffn1", feed_forward(e));
    add("layer.mixer", mixer(e));
    add("layer.conv_module", conv_module(e));
    add("layer.ffn2", feed_forward(e));
    add("layer.norms", 4 * norm(e.d_model));
    add("ssl.mask_embedding", c);
    add("ssl.quantizer.weight_proj", linear(c, h.groups * h.entries));
    add("ssl.quantizer.codebook", h.entries * h.codeword_dim);
    add("ssl.project_q", linear(h.codeword_dim, h.final_dim));
    add("ssl.final_proj", linear(e.d_model, h.final_dim));
    r.per_layer = layer(e);
    r.encoder = linear(e.input_dim, e.d_model) + e.n_layers * r.per_layer;
    r.total = r.encoder + cnn(cfg.cnn) + norm(c) + c + linear(c, h.groups * h.entries) + h.entries * h.codeword_dim +
              linear(h.codeword_dim, h.final_dim) + linear(e.d_model, h.final_dim);
    return r;
}

} // namespace summix

#endif
