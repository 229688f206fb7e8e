// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_SSL_MASK_HPP
#define SUMMIX_SSL_MASK_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "summix/numcore/ops.hpp"
#include "summix/numcore/random.hpp"

namespace summix::ssl {

struct MaskConfig {
    double prob = 0.065;         // fraction of frames drawn as span starts
    std::size_t span = 10;       // M
    std::size_t min_masks = 2;   // spans per utterance, at least

    void validate() const {
        if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("mask: prob must lie in [0, 1]");
        if (span == 0) throw std::invalid_argument("mask: span must be at least 1");
    }
};

// Number of span starts for a T-frame utterance: p*T rounded stochastically,
// raised to min_masks and capped at T.
inline std::size_t mask_start_count(std::size_t frames, const MaskConfig& cfg, RandomStream& rng) {
    const double expected = cfg.prob * static_cast<double>(frames);
    auto n = static_cast<std::size_t>(std::floor(expected + rng.uniform()));
    n = std::max(n, cfg.min_masks);
    return std::min(n, frames);
}

// Spans of M frames starting at distinct uniformly drawn positions, clipped at T.
inline FrameMask sample_mask(std::size_t frames, const MaskConfig& cfg, RandomStream& rng) {
    cfg.validate();
    if (frames < cfg.span) {
        throw std::invalid_argument("sample_mask: " + std::to_string(frames) + " frames is shorter than the span " +
                                    std::to_string(cfg.span));
    }
    FrameMask mask(frames, 0);
    const std::size_t n = mask_start_count(frames, cfg, rng);
    for (std::size_t s : rng.sample_without_replacement(frames, n)) {
        const std::size_t end = std::min(frames, s + cfg.span);
        std::fill(mask.begin() + static_cast<std::ptrdiff_t>(s), mask.begin() + static_cast<std::ptrdiff_t>(end), 1);
    }
    return mask;
}

inline double masked_fraction(const FrameMask& mask) {
    if (mask.empty()) return 0.0;
    return static_cast<double>(std::count(mask.begin(), mask.end(), 1)) / static_cast<double>(mask.size());
}

} // namespace summix::ssl

#endif
