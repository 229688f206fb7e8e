// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_BENCH_BENCH_HPP
#define SUMMIX_BENCH_BENCH_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "summix/conformer/encoder.hpp"
#include "summix/numcore/autodiff.hpp"

namespace summix::bench {

struct BenchRecord {
    MixerKind mixer_kind = MixerKind::summary_mixing;
    std::size_t frames = 0;
    std::size_t d_model = 0;
    std::size_t repeats = 0;
    double median_seconds = 0;
    std::size_t activation_elements = 0;  // one Conformer layer, batch 1
};

struct TimingOptions {
    std::size_t repeats = 5;
    std::size_t warmups = 2;
    std::size_t n_heads = 8;
    std::uint64_t seed = 0;
    bool backward = false;

    void validate() const {
        if (repeats < 5) throw std::invalid_argument("bench: at least 5 timed repeats");
        if (warmups < 2) throw std::invalid_argument("bench: at least 2 warm-up runs");
    }
};

// Single-layer encoder config used for timing one mixer at width d.
inline EncoderConfig mixer_bench_config(MixerKind kind, std::size_t d_model, std::size_t n_heads = 8) {
    EncoderConfig c;
    c.n_layers = 1;
    c.d_model = d_model;
    c.mlp_hidden = 4 * d_model;
    c.n_heads = n_heads;
    c.input_dim = d_model;
    c.mixer_kind = kind;
    c.validate();
    return c;
}

// Element counts of every tensor one forward pass creates with gradients on.
struct ActivationCount {
    std::size_t mixer = 0;
    std::size_t per_layer = 0;
    std::size_t input = 0;
    std::size_t total = 0;

    nlohmann::json to_json() const { return {{"mixer", mixer}, {"per_layer", per_layer}, {"input", input}, {"total", total}}; }
};

inline std::size_t mixer_activations(const EncoderConfig& c, std::size_t frames, std::size_t batch = 1) {
    const std::size_t bt = batch * frames, d = c.d_model;
    if (c.mixer_kind == MixerKind::mhsa) {
        // q, k, v, attention output, output projection, plus the kept
        // softmax weights of every head.
        return 5 * bt * d + batch * c.n_heads * frames * frames;
    }
    const auto s = c.summary_dims();
    const std::size_t local = 2 * bt * s.f_hidden + bt * s.d_summary;
    const std::size_t summary = 2 * bt * s.s_hidden + bt * s.d_summary + batch * s.d_summary;
    const std::size_t broadcast = bt * s.d_summary + 2 * bt * s.d_summary;  // repeat over time, concat
    const std::size_t combine = 2 * bt * s.c_hidden + bt * s.d_out;
    return local + summary + broadcast + combine;
}

inline ActivationCount activation_memory(const EncoderConfig& c, std::size_t frames, std::size_t batch = 1) {
    c.validate();
    const std::size_t bt = batch * frames, d = c.d_model, h = c.mlp_hidden;
    ActivationCount a;
    a.mixer = mixer_activations(c, frames, batch);
    const std::size_t ffn = 4 * bt * d + 2 * bt * h;  // LN, up, swish, down, scale, residual
    const std::size_t conv = 10 * bt * d;             // LN, pw1, GLU, zero pad, depthwise, LN, swish, pw2, residual
    a.per_layer = 2 * ffn + bt * d + a.mixer + bt * d + conv + bt * d;
    a.input = bt * d + (c.mixer_kind == MixerKind::mhsa ? bt * d : 0);
    a.total = a.input + c.n_layers * a.per_layer;
    return a;
}

// Difference of the two mixers' counts at 2T over the difference at T.
inline double activation_gap_ratio(std::size_t d_model, std::size_t n_heads, std::size_t frames) {
    auto gap = [&](std::size_t t) {
        return static_cast<double>(activation_memory(mixer_bench_config(MixerKind::mhsa, d_model, n_heads), t).total) -
               static_cast<double>(activation_memory(mixer_bench_config(MixerKind::summary_mixing, d_model, n_heads), t).total);
    };
    return gap(2 * frames) / gap(frames);
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of nothing");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Median wall time of the mixer block alone at each length. Parameters are
// drawn once from `seed` and shared by every length.
inline std::vector<BenchRecord> time_scaling(MixerKind kind, const std::vector<std::size_t>& lengths, std::size_t d_model,
                                             const TimingOptions& opt = {}) {
    opt.validate();
    if (lengths.size() < 4) throw std::invalid_argument("bench: need at least 4 lengths");
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        if (lengths[i] == 0 || (i > 0 && lengths[i] <= lengths[i - 1]))
            throw std::invalid_argument("bench: lengths must be positive and strictly increasing");
    }
    // Large tensors would otherwise get fresh mmap pages (and page faults) on
    // every repeat; keeping freed blocks in the heap times the steady state.
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    const auto cfg = mixer_bench_config(kind, d_model, opt.n_heads);
    RandomStream rng(opt.seed);
    const auto params = ConformerLayerParams<float>::make_mixer(cfg, rng);
    std::vector<BenchRecord> out;
    for (auto t : lengths) {
        RandomStream xr(opt.seed ^ (0x9E3779B97F4A7C15ULL * t));
        const auto x = Tensor<float>::normal({1, t, d_model}, 1.0, xr, opt.backward);
        auto run = [&] {
            const auto t0 = std::chrono::steady_clock::now();
            if (opt.backward) {
                auto y = mixer_forward(SequenceBatch<float>::dense(x), params, kind);
                forward_backward(ops::sum(y.values), std::vector<Tensor<float>>{x});
            } else {
                NoGradGuard ng;
                auto y = mixer_forward(SequenceBatch<float>::dense(x), params, kind);
                if (!std::isfinite(y.values.values()[0])) throw std::runtime_error("bench: non-finite mixer output");
            }
            return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        };
        for (std::size_t w = 0; w < opt.warmups; ++w) run();
        std::vector<double> times;
        for (std::size_t r = 0; r < opt.repeats; ++r) times.push_back(run());
        out.push_back({kind, t, d_model, opt.repeats, median(times), activation_memory(cfg, t).total});
    }
    return out;
}

// Least-squares slope of log(y) against log(x).
inline double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_loglog_slope: need matching series of 2+ points");
    double mx = 0, my = 0;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0) || !(y[i] > 0)) throw std::invalid_argument("fit_loglog_slope: values must be positive");
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
        mx += lx.back();
        my += ly.back();
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    if (sxx == 0) throw std::invalid_argument("fit_loglog_slope: all lengths equal");
    return sxy / sxx;
}

inline double fit_loglog_slope(const std::vector<BenchRecord>& records) {
    if (records.size() < 4) throw std::invalid_argument("fit_loglog_slope: need at least 4 records");
    std::vector<double> x, y;
    for (const auto& r : records) {
        x.push_back(static_cast<double>(r.frames));
        y.push_back(r.median_seconds);
    }
    return fit_loglog_slope(x, y);
}

inline std::string records_csv(const std::vector<BenchRecord>& records) {
    std::string s = "mixer,T,d_model,median_seconds,activation_elements\n";
    for (const auto& r : records)
        s += fmt::format("{},{},{},{:.9g},{}\n", to_string(r.mixer_kind), r.frames, r.d_model, r.median_seconds, r.activation_elements);
    return s;
}

// Thresholds the scaling claims are judged against.
struct ScalingThresholds {
    double summary_mixing_max_slope = 1.3;
    double mhsa_min_slope = 1.7;
    double gap_ratio_lo = 3.4;
    double gap_ratio_hi = 4.2;
};

struct ScalingSummary {
    std::vector<std::pair<MixerKind, double>> slopes;
    std::vector<std::pair<std::size_t, double>> gap_ratios;  // (T, gap(2T) / gap(T))
    ScalingThresholds thresholds;

    bool slope_ok(MixerKind k, double s) const {
        return k == MixerKind::mhsa ? s >= thresholds.mhsa_min_slope : s <= thresholds.summary_mixing_max_slope;
    }
    bool ratio_ok(double r) const { return r >= thresholds.gap_ratio_lo && r <= thresholds.gap_ratio_hi; }

    bool pass() const {
        for (const auto& [k, s] : slopes)
            if (!slope_ok(k, s)) return false;
        for (const auto& [t, r] : gap_ratios)
            if (!ratio_ok(r)) return false;
        return true;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        for (const auto& [k, s] : slopes) j["slopes"][to_string(k)] = {{"slope", s}, {"pass", slope_ok(k, s)}};
        j["gap_ratios"] = nlohmann::json::array();
        for (const auto& [t, r] : gap_ratios) j["gap_ratios"].push_back({{"T", t}, {"ratio", r}, {"pass", ratio_ok(r)}});
        j["thresholds"] = {{"summary_mixing_max_slope", thresholds.summary_mixing_max_slope},
                           {"mhsa_min_slope", thresholds.mhsa_min_slope},
                           {"gap_ratio", {thresholds.gap_ratio_lo, thresholds.gap_ratio_hi}}};
        j["pass"] = pass();
        return j;
    }
};

// Slopes per mixer present in `records`, gap ratios at every T >= 1024 whose
// double is also among the lengths.
inline ScalingSummary summarize(const std::vector<BenchRecord>& records, std::size_t n_heads = 8) {
    ScalingSummary s;
    for (auto kind : {MixerKind::summary_mixing, MixerKind::mhsa}) {
        std::vector<BenchRecord> mine;
        for (const auto& r : records)
            if (r.mixer_kind == kind) mine.push_back(r);
        if (mine.empty()) continue;
        s.slopes.emplace_back(kind, fit_loglog_slope(mine));
        for (const auto& r : mine) {
            if (kind != MixerKind::summary_mixing || r.frames < 1024) continue;
            const bool has_double = std::any_of(mine.begin(), mine.end(), [&](const auto& o) { return o.frames == 2 * r.frames; });
            if (has_double) s.gap_ratios.emplace_back(r.frames, activation_gap_ratio(r.d_model, n_heads, r.frames));
        }
    }
    return s;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream o(path);
    if (!o || !(o << text)) throw std::runtime_error("cannot write " + path);
}

} // namespace summix::bench

#endif
