// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_PROBE_TASKS_HPP
#define SUMMIX_PROBE_TASKS_HPP

#include <vector>

#include <Eigen/Dense>

#include "summix/probe/probe.hpp"
#include "summix/ssl/data.hpp"
#include "summix/ssl/model.hpp"

// Desk-scale labelled tasks for the frozen-encoder probe.
namespace summix::probe {

template <typename T>
struct LabelledBatches {
    std::vector<SequenceBatch<T>> inputs;
    std::vector<std::vector<std::size_t>> labels;
    std::size_t classes = 0;
};

// Minimum-norm u with W^T u = 1 for the input projection W[C, D]: a latent
// shift along u reaches the encoder as the constant vector 1 in every dimension.
template <typename T>
std::vector<double> constant_shift_direction(const Tensor<T>& w) {
    const auto c = static_cast<Eigen::Index>(w.dim(0)), d = static_cast<Eigen::Index>(w.dim(1));
    Eigen::MatrixXd wt(d, c);
    for (Eigen::Index i = 0; i < c; ++i)
        for (Eigen::Index j = 0; j < d; ++j) wt(j, i) = static_cast<double>(w.values()[static_cast<std::size_t>(i * d + j)]);
    const Eigen::VectorXd u = wt.completeOrthogonalDecomposition().solve(Eigen::VectorXd::Ones(d));
    return std::vector<double>(u.data(), u.data() + u.size());
}

// Binary task whose label lives only in entry 0 of the layer outputs. Each
// utterance's frontend latents are shifted by +-strength along the
// constant-shift direction: the input projection turns the shift into a
// constant offset across all D dimensions, which every layer's LayerNorm then
// removes exactly. Inputs are latents; encode them with encoder_forward.
template <typename T>
LabelledBatches<T> planted_layer0_task(const ssl::SslModel<T>& model, const ssl::FeatureCorpus<T>& corpus,
                                       std::size_t batches, std::size_t batch_size, double strength, RandomStream& rng) {
    const auto u = constant_shift_direction(model.encoder.input_proj.w);
    LabelledBatches<T> out;
    out.classes = 2;
    NoGradGuard ng;
    for (std::size_t b = 0; b < batches; ++b) {
        std::vector<std::size_t> idx, labels;
        for (std::size_t i = 0; i < batch_size; ++i) {
            idx.push_back(static_cast<std::size_t>(rng.below(corpus.size())));
            labels.push_back(static_cast<std::size_t>(rng.below(2)));
        }
        auto lat = ssl::extract_latents(model, corpus.batch(idx));
        std::vector<T> v = lat.values.values();
        const std::size_t frames = lat.frames(), c = lat.width();
        for (std::size_t i = 0; i < batch_size; ++i) {
            const double sign = labels[i] ? strength : -strength;
            for (std::size_t t = 0; t < frames; ++t) {
                if (!lat.valid(i, t)) continue;
                for (std::size_t j = 0; j < c; ++j) v[(i * frames + t) * c + j] += static_cast<T>(sign * u[j]);
            }
        }
        out.inputs.push_back(lat.with_values(Tensor<T>(lat.values.shape(), std::move(v))));
        out.labels.push_back(std::move(labels));
    }
    return out;
}

// Planted task end to end: build it from `cfg.seed`, encode with the frozen
// encoder and fit the probe.
template <typename T>
ProbeResult<T> probe_planted_layer0(ssl::SslModel<T>& model, const ssl::FeatureCorpus<T>& corpus, std::size_t batches,
                                    std::size_t batch_size, double strength, const ProbeConfig& cfg) {
    RandomStream rng(cfg.seed);
    auto task = planted_layer0_task(model, corpus, batches, batch_size, strength, rng);
    const auto& ecfg = model.cfg.encoder;
    return train_probe<T>(model, task.inputs, task.labels, task.classes,
                          [&](const SequenceBatch<T>& x) { return encoder_forward(x, ecfg, model.encoder); }, cfg);
}

// Which synthetic unit is being repeated, for the first `classes` units of the
// inventory. Inputs are normalized filterbank features.
template <typename T>
LabelledBatches<T> unit_identity_task(std::size_t classes, std::size_t batches, std::size_t batch_size, double seconds,
                                      const frontend::FbankConfig& fcfg, RandomStream& rng) {
    frontend::SyntheticSpeech gen;
    if (classes < 2 || classes > gen.inventory()) throw std::invalid_argument("unit task: classes must lie in [2, inventory]");
    frontend::Fbank fb(fcfg);
    LabelledBatches<T> out;
    out.classes = classes;
    for (std::size_t b = 0; b < batches; ++b) {
        std::vector<Tensor<T>> items;
        std::vector<std::size_t> labels;
        for (std::size_t i = 0; i < batch_size; ++i) {
            const auto y = static_cast<std::size_t>(rng.below(classes));
            items.push_back(ssl::normalize_features(fb.template operator()<T>(gen.generate_unit(y, seconds, rng).samples)));
            labels.push_back(y);
        }
        out.inputs.push_back(pad_sequences(items));
        out.labels.push_back(std::move(labels));
    }
    return out;
}

} // namespace summix::probe

#endif
