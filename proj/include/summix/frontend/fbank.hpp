// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_FRONTEND_FBANK_HPP
#define SUMMIX_FRONTEND_FBANK_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

#include "summix/numcore/ops.hpp"
#include "summix/numcore/tensor.hpp"

namespace summix::frontend {

struct FbankConfig {
    std::size_t n_mels = 80;
    double window_ms = 25.0;
    double hop_ms = 10.0;
    std::size_t sample_rate_hz = 16000;
    std::size_t fft_size = 512;

    std::size_t window_samples() const { return static_cast<std::size_t>(std::lround(window_ms * sample_rate_hz / 1000.0)); }
    std::size_t hop_samples() const { return static_cast<std::size_t>(std::lround(hop_ms * sample_rate_hz / 1000.0)); }

    void validate() const {
        if (!(window_ms > hop_ms && hop_ms > 0)) throw std::invalid_argument("fbank: need window_ms > hop_ms > 0");
        if (n_mels < 1) throw std::invalid_argument("fbank: n_mels must be >= 1");
        if (fft_size < window_samples()) throw std::invalid_argument("fbank: fft_size shorter than the window");
    }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// n_mels + 2 edge frequencies equally spaced on the Mel scale over [0, sr/2];
// filter m peaks at edge m + 1.
inline std::vector<double> mel_edges_hz(const FbankConfig& cfg) {
    const double top = hz_to_mel(cfg.sample_rate_hz / 2.0);
    std::vector<double> edges(cfg.n_mels + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) edges[i] = mel_to_hz(top * static_cast<double>(i) / (cfg.n_mels + 1));
    return edges;
}

inline std::size_t frame_count(std::size_t n_samples, const FbankConfig& cfg) {
    const auto win = cfg.window_samples();
    if (n_samples < win) {
        throw std::invalid_argument("fbank: waveform of " + std::to_string(n_samples) +
                                    " samples is shorter than one window (" + std::to_string(win) + ")");
    }
    return 1 + (n_samples - win) / cfg.hop_samples();
}

class Fbank {
public:
    explicit Fbank(FbankConfig cfg = {}) : cfg_(cfg) {
        cfg_.validate();
        const std::size_t n = cfg_.fft_size, win = cfg_.window_samples(), bins = n / 2 + 1;
        window_.resize(win);
        // Periodic Hann.
        for (std::size_t i = 0; i < win; ++i) window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win);

        const auto edges = mel_edges_hz(cfg_);
        filters_.assign(cfg_.n_mels * bins, 0.0);
        for (std::size_t m = 0; m < cfg_.n_mels; ++m) {
            const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
            for (std::size_t k = 0; k < bins; ++k) {
                const double f = static_cast<double>(k) * cfg_.sample_rate_hz / n;
                double w = 0.0;
                if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
                else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
                filters_[m * bins + k] = w;
            }
        }

        const FftwBuffer<double> in(n);
        const FftwBuffer<fftw_complex> spec(bins);
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.p, spec.p, FFTW_ESTIMATE);
    }

    Fbank(const Fbank&) = delete;
    Fbank& operator=(const Fbank&) = delete;

    ~Fbank() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }

    const FbankConfig& config() const { return cfg_; }

    // Log-Mel energies [T, n_mels]; samples are mono at cfg.sample_rate_hz.
    template <typename T = float>
    Tensor<T> operator()(std::span<const float> samples) const {
        const std::size_t frames = frame_count(samples.size(), cfg_);
        const std::size_t n = cfg_.fft_size, win = cfg_.window_samples(), hop = cfg_.hop_samples(), bins = n / 2 + 1;
        std::vector<T> out(frames * cfg_.n_mels);
        std::vector<double> power(bins);
        // Per-call buffers keep concurrent calls on one Fbank independent.
        const FftwBuffer<double> in(n);
        const FftwBuffer<fftw_complex> spec(bins);
        for (std::size_t t = 0; t < frames; ++t) {
            std::fill(in.p, in.p + n, 0.0);
            for (std::size_t i = 0; i < win; ++i) in.p[i] = window_[i] * samples[t * hop + i];
            fftw_execute_dft_r2c(plan_, in.p, spec.p);
            for (std::size_t k = 0; k < bins; ++k) power[k] = spec.p[k][0] * spec.p[k][0] + spec.p[k][1] * spec.p[k][1];
            for (std::size_t m = 0; m < cfg_.n_mels; ++m) {
                double e = 0.0;
                const double* fw = filters_.data() + m * bins;
                for (std::size_t k = 0; k < bins; ++k) e += fw[k] * power[k];
                out[t * cfg_.n_mels + m] = static_cast<T>(std::log(std::max(e, kLogFloor)));
            }
        }
        return Tensor<T>({frames, cfg_.n_mels}, std::move(out));
    }

    std::span<const double> filter(std::size_t m) const {
        const std::size_t bins = cfg_.fft_size / 2 + 1;
        return {filters_.data() + m * bins, bins};
    }

private:
    template <typename E>
    struct FftwBuffer {
        E* p;
        explicit FftwBuffer(std::size_t n) : p(static_cast<E*>(fftw_malloc(sizeof(E) * n))) {
            if (!p) throw std::bad_alloc();
        }
        ~FftwBuffer() { fftw_free(p); }
        FftwBuffer(const FftwBuffer&) = delete;
        FftwBuffer& operator=(const FftwBuffer&) = delete;
    };

    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }

    FbankConfig cfg_;
    std::vector<double> window_;
    std::vector<double> filters_;
    fftw_plan plan_ = nullptr;
};

template <typename T = float>
Tensor<T> fbank(std::span<const float> samples, const FbankConfig& cfg = {}) {
    return Fbank(cfg).template operator()<T>(samples);
}

} // namespace summix::frontend

#endif
