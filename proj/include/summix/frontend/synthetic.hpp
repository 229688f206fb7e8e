// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_FRONTEND_SYNTHETIC_HPP
#define SUMMIX_FRONTEND_SYNTHETIC_HPP

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "summix/frontend/wav.hpp"
#include "summix/numcore/random.hpp"

namespace summix::frontend {

// Speech-like test signal: a sequence of "units" (60-200 ms) drawn from a
// small inventory, each a chord of three partials whose pitch glides slowly
// within the unit, with raised-cosine onsets and a little white noise. With
// successor_prob > 0 the unit sequence follows a first-order grammar: each
// unit has a fixed successor taken with that probability, so neighbouring
// context predicts what lies in between.
struct SyntheticSpeechConfig {
    std::uint32_t sample_rate = 16000;
    std::size_t inventory = 12;
    double min_unit_s = 0.06;
    double max_unit_s = 0.20;
    double noise = 0.01;
    double successor_prob = 0.0;
};

class SyntheticSpeech {
public:
    explicit SyntheticSpeech(SyntheticSpeechConfig cfg = {}, std::uint64_t inventory_seed = 7) : cfg_(cfg) {
        RandomStream rng(inventory_seed);
        units_.resize(cfg_.inventory);
        for (auto& u : units_) {
            u.partials[0] = rng.uniform(150.0, 900.0);
            u.partials[1] = rng.uniform(900.0, 2500.0);
            u.partials[2] = rng.uniform(2500.0, 6000.0);
            u.glide = rng.uniform(-0.3, 0.3);
        }
        const auto order = rng.sample_without_replacement(units_.size(), units_.size());
        successor_.resize(units_.size());
        for (std::size_t i = 0; i < order.size(); ++i) successor_[order[i]] = order[(i + 1) % order.size()];
    }

    std::size_t successor(std::size_t unit) const { return successor_.at(unit); }

    Waveform generate(double seconds, RandomStream& rng) const { return render(seconds, rng, units_.size()); }

    // Only `unit` is spoken, repeated with random durations and amplitudes.
    Waveform generate_unit(std::size_t unit, double seconds, RandomStream& rng) const {
        if (unit >= units_.size()) throw std::out_of_range("SyntheticSpeech: no unit " + std::to_string(unit));
        return render(seconds, rng, unit);
    }

    std::size_t inventory() const { return units_.size(); }

private:
    // `fixed` < inventory pins every unit; otherwise units follow the grammar.
    Waveform render(double seconds, RandomStream& rng, std::size_t fixed) const {
        Waveform w;
        w.sample_rate = cfg_.sample_rate;
        const auto n = static_cast<std::size_t>(seconds * cfg_.sample_rate);
        w.samples.assign(n, 0.0f);
        std::size_t pos = 0;
        std::array<double, 3> phase{0.0, 0.0, 0.0};
        std::size_t current = fixed < units_.size() ? fixed : rng.below(units_.size());
        bool first = true;
        while (pos < n) {
            if (!first && fixed >= units_.size()) {
                const bool follow = cfg_.successor_prob > 0 && rng.uniform() < cfg_.successor_prob;
                current = follow ? successor_[current] : rng.below(units_.size());
            }
            first = false;
            const auto& u = units_[current];
            const auto len = std::min<std::size_t>(
                n - pos, static_cast<std::size_t>(rng.uniform(cfg_.min_unit_s, cfg_.max_unit_s) * cfg_.sample_rate));
            const double amp = rng.uniform(0.2, 0.5);
            const std::size_t ramp = std::max<std::size_t>(1, len / 8);
            for (std::size_t i = 0; i < len; ++i) {
                const double frac = static_cast<double>(i) / static_cast<double>(len);
                double env = 1.0;
                if (i < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * i / ramp);
                else if (len - i <= ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * (len - i) / ramp);
                double s = 0.0;
                for (std::size_t k = 0; k < 3; ++k) {
                    const double f = u.partials[k] * (1.0 + u.glide * frac);
                    phase[k] += 2.0 * std::numbers::pi * f / cfg_.sample_rate;
                    s += std::sin(phase[k]) / static_cast<double>(k + 1);
                }
                w.samples[pos + i] = static_cast<float>(amp * env * s / 1.8 + cfg_.noise * rng.normal());
            }
            pos += len;
        }
        return w;
    }

    struct Unit {
        std::array<double, 3> partials{};
        double glide = 0.0;
    };
    SyntheticSpeechConfig cfg_;
    std::vector<Unit> units_;
    std::vector<std::size_t> successor_;
};

inline Waveform sine_wave(double hz, double seconds, std::uint32_t sample_rate = 16000, double amp = 0.5) {
    Waveform w;
    w.sample_rate = sample_rate;
    w.samples.resize(static_cast<std::size_t>(seconds * sample_rate));
    for (std::size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * hz * i / sample_rate));
    return w;
}

} // namespace summix::frontend

#endif
