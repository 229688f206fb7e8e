// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_MIXERS_SEQUENCE_BATCH_HPP
#define SUMMIX_MIXERS_SEQUENCE_BATCH_HPP

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "summix/numcore/ops.hpp"
#include "summix/numcore/tensor.hpp"

namespace summix {

// Padded batch of per-frame feature vectors: values is [B, T, D] and mask
// flags the valid frames (B*T entries, row-major).
template <typename T>
struct SequenceBatch {
    Tensor<T> values;
    FrameMask mask;

    SequenceBatch() = default;
    SequenceBatch(Tensor<T> v, FrameMask m) : values(std::move(v)), mask(std::move(m)) {
        if (values.rank() != 3) throw ShapeError("SequenceBatch: values must be [B, T, D], got " + shape_str(values.shape()));
        if (values.dim(1) < 1) throw ShapeError("SequenceBatch: T must be at least 1");
        if (mask.size() != values.dim(0) * values.dim(1)) throw ShapeError("SequenceBatch: mask size must equal B*T");
    }

    // Every frame valid.
    static SequenceBatch dense(Tensor<T> v) {
        const std::size_t n = v.rank() == 3 ? v.dim(0) * v.dim(1) : 0;
        return SequenceBatch(std::move(v), FrameMask(n, 1));
    }

    std::size_t batch() const { return values.dim(0); }
    std::size_t frames() const { return values.dim(1); }
    std::size_t width() const { return values.dim(2); }

    bool valid(std::size_t b, std::size_t t) const { return mask[b * frames() + t] != 0; }

    std::size_t valid_frames(std::size_t b) const {
        return static_cast<std::size_t>(
            std::count_if(mask.begin() + static_cast<std::ptrdiff_t>(b * frames()),
                          mask.begin() + static_cast<std::ptrdiff_t>((b + 1) * frames()), [](auto m) { return m != 0; }));
    }

    SequenceBatch with_values(Tensor<T> v) const { return SequenceBatch(std::move(v), mask); }
};

// Stacks per-utterance [T_i, D] matrices into one zero-padded batch.
template <typename T>
SequenceBatch<T> pad_sequences(const std::vector<Tensor<T>>& items) {
    if (items.empty()) throw std::invalid_argument("pad_sequences: no sequences");
    const std::size_t d = items[0].dim(1);
    std::size_t tmax = 0;
    for (const auto& it : items) {
        if (it.rank() != 2 || it.dim(1) != d) throw ShapeError("pad_sequences: every item must be [T, " + std::to_string(d) + "]");
        tmax = std::max(tmax, it.dim(0));
    }
    const std::size_t b = items.size();
    std::vector<T> v(b * tmax * d, T(0));
    FrameMask mask(b * tmax, 0);
    for (std::size_t i = 0; i < b; ++i) {
        const auto& src = items[i].values();
        std::copy(src.begin(), src.end(), v.begin() + static_cast<std::ptrdiff_t>(i * tmax * d));
        std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(i * tmax), items[i].dim(0), std::uint8_t{1});
    }
    return SequenceBatch<T>(Tensor<T>({b, tmax, d}, std::move(v)), std::move(mask));
}

} // namespace summix

#endif
