// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_SSL_SCHEDULE_HPP
#define SUMMIX_SSL_SCHEDULE_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "summix/numcore/tensor.hpp"

namespace summix::ssl {

// Linear warmup to peak_lr at step = warmup, then inverse square-root decay.
struct NoamSchedule {
    std::size_t warmup = 30000;
    double peak_lr = 5e-4;

    void validate() const {
        if (warmup == 0) throw std::invalid_argument("noam: warmup must be positive");
        if (!(peak_lr > 0.0)) throw std::invalid_argument("noam: peak_lr must be positive");
    }

    double lr(std::size_t step) const {
        validate();
        if (step == 0) throw std::invalid_argument("noam_lr: steps are counted from 1");
        const double s = static_cast<double>(step), w = static_cast<double>(warmup);
        return peak_lr * std::min(s / w, std::sqrt(w / s));
    }
};

inline double noam_lr(std::size_t step, const NoamSchedule& sched) { return sched.lr(step); }

// Gumbel temperature: start * decay^step, floored at `end`.
struct TemperatureSchedule {
    double start = 2.0;
    double end = 0.5;
    double decay = 0.999995;

    void validate() const {
        if (!(start > 0.0 && end > 0.0 && end <= start)) throw std::invalid_argument("tau: need 0 < end <= start");
        if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("tau: decay must lie in (0, 1]");
    }

    double tau(std::size_t step) const { return std::max(end, start * std::pow(decay, static_cast<double>(step))); }

    // Decay chosen so that the floor is reached exactly at `steps`.
    static TemperatureSchedule annealed_over(double start, double end, std::size_t steps) {
        TemperatureSchedule s{start, end, 1.0};
        if (steps > 0) s.decay = std::pow(end / start, 1.0 / static_cast<double>(steps));
        s.validate();
        return s;
    }
};

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-6;
    double weight_decay = 0.01;
    double clip_norm = 0.0;  // global gradient-norm clip; 0 disables

    void validate() const {
        if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw std::invalid_argument("adamw: betas must lie in [0, 1)");
        if (!(eps > 0)) throw std::invalid_argument("adamw: eps must be positive");
        if (!(weight_decay >= 0)) throw std::invalid_argument("adamw: weight_decay must be non-negative");
        if (!(clip_norm >= 0)) throw std::invalid_argument("adamw: clip_norm must be non-negative");
    }
};

// Adam with decoupled weight decay. Decay applies to matrices and higher-rank
// tensors only; biases, norm gains and embeddings are left alone.
template <typename T>
class AdamW {
public:
    AdamW(std::vector<Tensor<T>> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
        cfg_.validate();
        for (const auto& p : params_) {
            m_.emplace_back(p.numel(), 0.0);
            v_.emplace_back(p.numel(), 0.0);
        }
    }

    std::size_t steps() const { return t_; }
    const std::vector<Tensor<T>>& params() const { return params_; }

    // Returns the pre-clip global gradient norm.
    double step(const std::vector<std::vector<T>>& grads, double lr) {
        if (grads.size() != params_.size()) throw std::invalid_argument("adamw: one gradient per parameter expected");
        double sq = 0;
        for (std::size_t i = 0; i < grads.size(); ++i) {
            if (grads[i].size() != params_[i].numel()) throw std::invalid_argument("adamw: gradient shape mismatch");
            for (T g : grads[i]) sq += static_cast<double>(g) * static_cast<double>(g);
        }
        const double norm = std::sqrt(sq);
        const double clip = (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto x = params_[i].mutable_data();
            const bool decay = params_[i].rank() >= 2;
            for (std::size_t e = 0; e < x.size(); ++e) {
                const double g = clip * static_cast<double>(grads[i][e]);
                m_[i][e] = cfg_.beta1 * m_[i][e] + (1 - cfg_.beta1) * g;
                v_[i][e] = cfg_.beta2 * v_[i][e] + (1 - cfg_.beta2) * g * g;
                double upd = (m_[i][e] / bc1) / (std::sqrt(v_[i][e] / bc2) + cfg_.eps);
                if (decay) upd += cfg_.weight_decay * static_cast<double>(x[e]);
                x[e] = static_cast<T>(static_cast<double>(x[e]) - lr * upd);
            }
        }
        return norm;
    }

private:
    std::vector<Tensor<T>> params_;
    AdamWConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

} // namespace summix::ssl

#endif
