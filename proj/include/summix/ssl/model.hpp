// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_SSL_MODEL_HPP
#define SUMMIX_SSL_MODEL_HPP

#include <string>
#include <vector>

#include "summix/conformer/encoder.hpp"
#include "summix/frontend/cnn1d.hpp"
#include "summix/ssl/losses.hpp"
#include "summix/ssl/mask.hpp"
#include "summix/ssl/quantizer.hpp"

namespace summix::ssl {

struct ObjectiveConfig {
    MaskConfig mask;
    std::size_t distractors = 100;  // K
    double kappa = 0.1;
    double diversity_weight = 0.1;  // alpha
    double tau_start = 2.0;
    double tau_end = 0.5;

    void validate() const {
        mask.validate();
        if (distractors == 0) throw std::invalid_argument("objective: distractors must be at least 1");
        if (!(kappa > 0)) throw std::invalid_argument("objective: kappa must be positive");
        if (!(diversity_weight >= 0)) throw std::invalid_argument("objective: diversity_weight must be non-negative");
        if (!(tau_start > 0 && tau_end > 0 && tau_end <= tau_start)) throw std::invalid_argument("objective: need 0 < tau_end <= tau_start");
    }
};

// Frontend, context encoder and the w2v2 heads. Parameter names line up with
// the block names of count_params.
template <typename T>
struct SslModel {
    using value_type = T;
    ModelConfig cfg;
    frontend::Cnn1dParams<T> cnn;
    NormParams<T> feature_norm;
    Tensor<T> mask_embedding;  // [C]
    EncoderParams<T> encoder;
    QuantizerParams<T> quantizer;
    LinearParams<T> project_q;   // codeword -> final_dim
    LinearParams<T> final_proj;  // d_model -> final_dim

    SslModel() = default;
    SslModel(const ModelConfig& c, RandomStream& rng)
        : cfg((c.validate(), c)), cnn(c.cnn, rng), feature_norm(c.cnn.channels),
          mask_embedding(Tensor<T>::uniform({c.cnn.channels}, T(0), T(1), rng, true)), encoder(c.encoder, rng),
          quantizer(c.cnn.channels, c.heads, rng), project_q(c.heads.codeword_dim, c.heads.final_dim, rng),
          final_proj(c.encoder.d_model, c.heads.final_dim, rng) {}

    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        cnn.visit(join_name(prefix, "frontend.cnn"), fn);
        feature_norm.visit(join_name(prefix, "frontend.feature_norm"), fn);
        encoder.visit(join_name(prefix, "encoder"), fn);
        fn(join_name(prefix, "ssl.mask_embedding"), mask_embedding);
        quantizer.visit(join_name(prefix, "ssl.quantizer"), fn);
        project_q.visit(join_name(prefix, "ssl.project_q"), fn);
        final_proj.visit(join_name(prefix, "ssl.final_proj"), fn);
    }

    // Encoder side only (frontend + context encoder), which is what probing
    // and checkpoints of "the encoder" refer to.
    void visit_encoder(const std::string& prefix, const ParamVisitor<T>& fn) {
        cnn.visit(join_name(prefix, "frontend.cnn"), fn);
        feature_norm.visit(join_name(prefix, "frontend.feature_norm"), fn);
        encoder.visit(join_name(prefix, "encoder"), fn);
    }
};

// Layer-normalized frontend latents [B, T', C].
template <typename T>
SequenceBatch<T> extract_latents(const SslModel<T>& m, const SequenceBatch<T>& features) {
    auto lat = frontend::cnn1d_downsample(features, m.cfg.cnn, m.cnn);
    auto normed = ops::layer_norm(lat.values, m.feature_norm.gamma, m.feature_norm.beta);
    return lat.with_values(ops::zero_masked(normed, lat.mask));
}

// All L + 1 encoder representations for (unmasked) input features.
template <typename T>
LayerOutputs<T> encode(const SslModel<T>& m, const SequenceBatch<T>& features, const ForwardContext& ctx = {}) {
    return encoder_forward(extract_latents(m, features), m.cfg.encoder, m.encoder, ctx);
}

// Draws span masks over the valid frames of every utterance.
inline FrameMask sample_batch_mask(const FrameMask& valid, std::size_t batch, std::size_t frames, const MaskConfig& cfg,
                                   RandomStream& rng) {
    FrameMask out(batch * frames, 0);
    for (std::size_t b = 0; b < batch; ++b) {
        std::vector<std::size_t> idx;
        for (std::size_t t = 0; t < frames; ++t)
            if (valid[b * frames + t]) idx.push_back(b * frames + t);
        const auto m = sample_mask(idx.size(), cfg, rng);
        for (std::size_t i = 0; i < idx.size(); ++i) out[idx[i]] = m[i];
    }
    return out;
}

// Masked frames take the learned embedding; every other frame is untouched.
template <typename T>
SequenceBatch<T> apply_mask(const SequenceBatch<T>& latents, const FrameMask& mask, const Tensor<T>& embedding) {
    return latents.with_values(ops::replace_frames(latents.values, mask, embedding));
}

template <typename T>
struct SslOutputs {
    Tensor<T> contrastive, diversity, total;
    ContrastiveStats stats;
    double perplexity = 0;
    double masked_fraction = 0;
    FrameMask mask;
};

// One w2v2 objective evaluation: mask latents, encode, and contrast the
// context vectors at masked frames against quantized clean latents.
template <typename T>
SslOutputs<T> ssl_forward(const SslModel<T>& m, const SequenceBatch<T>& features, const ObjectiveConfig& obj, double tau,
                          RandomStream& rng, bool training = true) {
    obj.validate();
    const auto lat = extract_latents(m, features);
    const std::size_t b = lat.batch(), t = lat.frames(), c = lat.width();
    SslOutputs<T> out;
    out.mask = sample_batch_mask(lat.mask, b, t, obj.mask, rng);

    const auto masked_in = apply_mask(lat, out.mask, m.mask_embedding);
    ForwardContext ctx{training, m.cfg.encoder.dropout, &rng};
    const auto layers = encoder_forward(masked_in, m.cfg.encoder, m.encoder, ctx);

    std::vector<std::size_t> rows;
    std::vector<std::vector<std::size_t>> groups(b);
    std::size_t valid = 0;
    for (std::size_t i = 0; i < b * t; ++i) {
        valid += lat.mask[i] != 0;
        if (!out.mask[i]) continue;
        groups[i / t].push_back(rows.size());
        rows.push_back(i);
    }
    out.masked_fraction = static_cast<double>(rows.size()) / static_cast<double>(valid);

    const auto& top = layers.back().values;
    auto ctx_vec = ops::linear(ops::gather_rows(ops::reshape(top, {b * t, top.dim(2)}), rows), m.final_proj.w, m.final_proj.b);
    QuantizeOptions qo;
    qo.training = training;
    qo.tau = tau;
    qo.rng = &rng;
    auto q = quantize(ops::gather_rows(ops::reshape(lat.values, {b * t, c}), rows), m.quantizer, qo);
    auto targets = ops::linear(q.targets, m.project_q.w, m.project_q.b);

    auto con = contrastive_loss(ctx_vec, targets, groups, obj.distractors, obj.kappa, rng);
    out.contrastive = con.loss;
    out.stats = con.stats;
    out.diversity = diversity_loss(q.avg_probs);
    out.total = ops::add(out.contrastive, ops::scale(out.diversity, static_cast<T>(obj.diversity_weight)));
    out.perplexity = q.mean_perplexity();
    return out;
}

} // namespace summix::ssl

#endif
