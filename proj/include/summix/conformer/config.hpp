// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_CONFORMER_CONFIG_HPP
#define SUMMIX_CONFORMER_CONFIG_HPP

#include <string>

#include <nlohmann/json.hpp>

#include "summix/frontend/cnn1d.hpp"
#include "summix/frontend/fbank.hpp"
#include "summix/mixers/mixer.hpp"

namespace summix {

struct EncoderConfig {
    std::size_t n_layers = 12;
    std::size_t d_model = 768;
    std::size_t mlp_hidden = 3072;
    std::size_t conv_kernel = 31;
    std::size_t conv_stride = 1;
    std::size_t n_heads = 8;
    MixerKind mixer_kind = MixerKind::summary_mixing;
    // Width of the frontend latents fed to the input projection.
    std::size_t input_dim = 512;
    // SummaryMixing internals; 0 means "same as d_model".
    std::size_t sm_summary_dim = 0;
    std::size_t sm_hidden = 0;
    double dropout = 0.1;

    std::size_t summary_dim() const { return sm_summary_dim ? sm_summary_dim : d_model; }
    std::size_t summary_hidden() const { return sm_hidden ? sm_hidden : d_model; }

    SummaryMixingDims summary_dims() const {
        const auto h = summary_hidden();
        return {d_model, summary_dim(), d_model, h, h, h, n_heads};
    }

    void validate() const {
        if (n_layers == 0) throw ConfigError("encoder: n_layers must be positive");
        if (d_model == 0 || mlp_hidden == 0 || input_dim == 0) throw ConfigError("encoder: widths must be positive");
        if (conv_kernel % 2 == 0) throw ConfigError("encoder: conv_kernel must be odd");
        if (conv_stride != 1) throw ConfigError("encoder: only conv_stride = 1 keeps the layer shape-preserving");
        if (n_heads == 0 || d_model % n_heads != 0) throw ConfigError("encoder: d_model must be divisible by n_heads");
        if (summary_dim() % n_heads != 0 || summary_hidden() % n_heads != 0) {
            throw ConfigError("encoder: SummaryMixing widths must be divisible by n_heads");
        }
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("encoder: dropout must be in [0, 1)");
    }
};

// Output heads of the w2v2 objective.
struct SslHeadConfig {
    std::size_t groups = 2;          // G
    std::size_t entries = 320;       // V
    std::size_t codeword_dim = 256;  // width of the concatenated G codewords
    std::size_t final_dim = 256;     // space in which context and targets are compared

    void validate() const {
        if (groups == 0 || entries < 2) throw ConfigError("quantizer: need G >= 1 and V >= 2");
        if (codeword_dim % groups != 0) throw ConfigError("quantizer: codeword_dim must be divisible by G");
        if (final_dim == 0) throw ConfigError("quantizer: final_dim must be positive");
    }
};

// Everything needed to build the whole model.
struct ModelConfig {
    frontend::FbankConfig fbank;
    frontend::Cnn1dConfig cnn;
    EncoderConfig encoder;
    SslHeadConfig heads;

    void validate() const {
        fbank.validate();
        cnn.validate();
        encoder.validate();
        heads.validate();
        if (cnn.in_features != fbank.n_mels) throw ConfigError("model: CNN input width must equal n_mels");
        if (encoder.input_dim != cnn.channels) throw ConfigError("model: encoder input_dim must equal CNN channels");
    }
};

inline nlohmann::json to_json(const ModelConfig& c) {
    return {
        {"fbank", {{"n_mels", c.fbank.n_mels}, {"window_ms", c.fbank.window_ms}, {"hop_ms", c.fbank.hop_ms},
                   {"sample_rate_hz", c.fbank.sample_rate_hz}, {"fft_size", c.fbank.fft_size}}},
        {"cnn", {{"channels", c.cnn.channels}, {"kernel_sizes", c.cnn.kernel_sizes}, {"strides", c.cnn.strides}}},
        {"encoder",
         {{"n_layers", c.encoder.n_layers}, {"d_model", c.encoder.d_model}, {"mlp_hidden", c.encoder.mlp_hidden},
          {"conv_kernel", c.encoder.conv_kernel}, {"conv_stride", c.encoder.conv_stride}, {"n_heads", c.encoder.n_heads},
          {"mixer_kind", to_string(c.encoder.mixer_kind)}, {"input_dim", c.encoder.input_dim},
          {"sm_summary_dim", c.encoder.summary_dim()}, {"sm_hidden", c.encoder.summary_hidden()},
          {"dropout", c.encoder.dropout}}},
        {"heads", {{"groups", c.heads.groups}, {"entries", c.heads.entries}, {"codeword_dim", c.heads.codeword_dim},
                   {"final_dim", c.heads.final_dim}}},
    };
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    const auto& f = j.at("fbank");
    c.fbank.n_mels = f.at("n_mels");
    c.fbank.window_ms = f.at("window_ms");
    c.fbank.hop_ms = f.at("hop_ms");
    c.fbank.sample_rate_hz = f.at("sample_rate_hz");
    c.fbank.fft_size = f.at("fft_size");
    const auto& n = j.at("cnn");
    c.cnn.in_features = c.fbank.n_mels;
    c.cnn.channels = n.at("channels");
    c.cnn.kernel_sizes = n.at("kernel_sizes").get<std::vector<std::size_t>>();
    c.cnn.strides = n.at("strides").get<std::vector<std::size_t>>();
    const auto& e = j.at("encoder");
    c.encoder.n_layers = e.at("n_layers");
    c.encoder.d_model = e.at("d_model");
    c.encoder.mlp_hidden = e.at("mlp_hidden");
    c.encoder.conv_kernel = e.at("conv_kernel");
    c.encoder.conv_stride = e.at("conv_stride");
    c.encoder.n_heads = e.at("n_heads");
    c.encoder.mixer_kind = parse_mixer_kind(e.at("mixer_kind"));
    c.encoder.input_dim = e.at("input_dim");
    c.encoder.sm_summary_dim = e.at("sm_summary_dim");
    c.encoder.sm_hidden = e.at("sm_hidden");
    c.encoder.dropout = e.at("dropout");
    const auto& h = j.at("heads");
    c.heads.groups = h.at("groups");
    c.heads.entries = h.at("entries");
    c.heads.codeword_dim = h.at("codeword_dim");
    c.heads.final_dim = h.at("final_dim");
    c.validate();
    return c;
}

// 12 x 768 / 3072, kernel 31, 8 heads, 512-channel frontend.
inline ModelConfig paper_config(MixerKind kind) {
    ModelConfig c;
    c.encoder.mixer_kind = kind;
    return c;
}

// Desk-scale: 2 layers of width 64.
inline ModelConfig toy_config(MixerKind kind) {
    ModelConfig c;
    c.cnn.channels = 64;
    c.encoder.n_layers = 2;
    c.encoder.d_model = 64;
    c.encoder.mlp_hidden = 128;
    c.encoder.n_heads = 4;
    c.encoder.input_dim = 64;
    c.encoder.mixer_kind = kind;
    c.heads.entries = 32;
    c.heads.codeword_dim = 64;
    c.heads.final_dim = 64;
    return c;
}

} // namespace summix

#endif
