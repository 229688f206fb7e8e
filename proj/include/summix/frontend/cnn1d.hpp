// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_FRONTEND_CNN1D_HPP
#define SUMMIX_FRONTEND_CNN1D_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "summix/mixers/sequence_batch.hpp"
#include "summix/numcore/ops.hpp"
#include "summix/numcore/params.hpp"

namespace summix::frontend {

enum class Activation { gelu, swish };

struct Cnn1dConfig {
    std::size_t in_features = 80;
    std::size_t channels = 512;
    std::vector<std::size_t> kernel_sizes{3, 3};
    std::vector<std::size_t> strides{2, 1};
    Activation activation = Activation::gelu;

    std::size_t layers() const { return kernel_sizes.size(); }

    std::size_t total_stride() const {
        std::size_t s = 1;
        for (auto v : strides) s *= v;
        return s;
    }

    void validate() const {
        if (kernel_sizes.size() != strides.size()) throw std::invalid_argument("cnn1d: kernel_sizes and strides differ in length");
        for (auto k : kernel_sizes)
            if (k % 2 == 0) throw std::invalid_argument("cnn1d: kernel sizes must be odd for same padding");
        for (auto s : strides)
            if (s == 0) throw std::invalid_argument("cnn1d: strides must be positive");
        if (channels == 0 || in_features == 0) throw std::invalid_argument("cnn1d: widths must be positive");
    }
};

template <typename T>
struct Cnn1dParams {
    using value_type = T;
    // w[K, Cin, Cout], b[Cout] per layer.
    std::vector<Tensor<T>> w;
    std::vector<Tensor<T>> b;

    Cnn1dParams() = default;
    Cnn1dParams(const Cnn1dConfig& cfg, RandomStream& rng) {
        cfg.validate();
        std::size_t cin = cfg.in_features;
        for (std::size_t l = 0; l < cfg.layers(); ++l) {
            const std::size_t fan = cfg.kernel_sizes[l] * cin;
            w.push_back(init_fan_in<T>({cfg.kernel_sizes[l], cin, cfg.channels}, fan, rng));
            b.push_back(init_fan_in<T>({cfg.channels}, fan, rng));
            cin = cfg.channels;
        }
    }

    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        for (std::size_t l = 0; l < w.size(); ++l) {
            fn(join_name(prefix, "conv" + std::to_string(l) + ".w"), w[l]);
            fn(join_name(prefix, "conv" + std::to_string(l) + ".b"), b[l]);
        }
    }
};

// Output frame s of a stride-`stride` layer is centered on input frame
// s*stride and is valid iff that frame was.
inline FrameMask downsample_mask(const FrameMask& mask, std::size_t batch, std::size_t frames, std::size_t stride) {
    const std::size_t to = ops::conv_output_length(frames, stride);
    FrameMask out(batch * to);
    for (std::size_t i = 0; i < batch; ++i)
        for (std::size_t s = 0; s < to; ++s) out[i * to + s] = mask[i * frames + s * stride];
    return out;
}

template <typename T>
Tensor<T> activate(const Tensor<T>& x, Activation a) {
    return a == Activation::gelu ? ops::gelu(x) : ops::swish(x);
}

// Fbank frames [B, T, 80] -> latents [B, ceil(T / total_stride), channels].
// Padding frames are zeroed before every layer so they never leak into valid
// outputs.
template <typename T>
SequenceBatch<T> cnn1d_downsample(const SequenceBatch<T>& x, const Cnn1dConfig& cfg, const Cnn1dParams<T>& p) {
    cfg.validate();
    if (x.width() != cfg.in_features) {
        throw ShapeError("cnn1d_downsample: expected " + std::to_string(cfg.in_features) + " input features, got " +
                         std::to_string(x.width()));
    }
    if (p.w.size() != cfg.layers()) throw ShapeError("cnn1d_downsample: parameter/config layer count mismatch");
    Tensor<T> h = x.values;
    FrameMask mask = x.mask;
    std::size_t frames = x.frames();
    for (std::size_t l = 0; l < cfg.layers(); ++l) {
        h = ops::zero_masked(h, mask);
        h = activate(ops::conv1d(h, p.w[l], p.b[l], cfg.strides[l]), cfg.activation);
        mask = downsample_mask(mask, x.batch(), frames, cfg.strides[l]);
        frames = h.dim(1);
    }
    h = ops::zero_masked(h, mask);
    return SequenceBatch<T>(std::move(h), std::move(mask));
}

} // namespace summix::frontend

#endif
