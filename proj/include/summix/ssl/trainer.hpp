// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_SSL_TRAINER_HPP
#define SUMMIX_SSL_TRAINER_HPP

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "summix/numcore/autodiff.hpp"
#include "summix/ssl/data.hpp"
#include "summix/ssl/model.hpp"
#include "summix/ssl/schedule.hpp"

namespace summix::ssl {

struct ScheduleConfig {
    std::size_t steps = 5000;
    std::size_t warmup = 500;
    double peak_lr = 5e-4;
    std::size_t accumulation = 1;  // micro-batches per optimizer update
    AdamWConfig adam;

    void validate() const {
        if (steps == 0) throw std::invalid_argument("schedule: steps must be positive");
        if (accumulation == 0) throw std::invalid_argument("schedule: accumulation must be at least 1");
        NoamSchedule{warmup, peak_lr}.validate();
        adam.validate();
    }
};

struct DataConfig {
    std::size_t utterances = 4;  // per micro-batch
    double seconds = 5.0;        // length of each synthetic utterance
    std::size_t corpus_size = 256;
    std::uint64_t data_seed = 11;
    std::size_t inventory = 64;  // synthetic units
    double successor_prob = 0.95;  // grammar strength of the synthetic unit sequence
    std::string wav_list;        // optional file of WAV paths replacing the synthetic corpus

    void validate() const {
        if (utterances == 0) throw std::invalid_argument("data: utterances must be positive");
        if (!(seconds > 0)) throw std::invalid_argument("data: seconds must be positive");
        if (wav_list.empty() && corpus_size == 0) throw std::invalid_argument("data: corpus_size must be positive");
        if (inventory == 0) throw std::invalid_argument("data: inventory must be positive");
        if (!(successor_prob >= 0 && successor_prob <= 1)) throw std::invalid_argument("data: successor_prob must lie in [0, 1]");
    }
};

struct PretrainConfig {
    ModelConfig model;
    ObjectiveConfig objective;
    ScheduleConfig schedule;
    DataConfig data;

    void validate() const {
        model.validate();
        objective.validate();
        schedule.validate();
        data.validate();
    }
};

struct StepMetrics {
    std::size_t step = 0;
    double lr = 0, contrastive = 0, diversity = 0, total = 0, perplexity = 0, masked_fraction = 0;
    double tau = 0, grad_norm = 0;
    std::size_t k_min = 0, reduced_utterances = 0;
};

inline std::string metrics_csv_header() { return "step,lr,contrastive,diversity,total,perplexity,masked_fraction"; }

inline std::string metrics_csv_row(const StepMetrics& m) {
    return fmt::format("{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}", m.step, m.lr, m.contrastive, m.diversity, m.total,
                       m.perplexity, m.masked_fraction);
}

class NonFiniteLossError : public std::runtime_error {
public:
    NonFiniteLossError(const std::string& what, std::string dump) : std::runtime_error(what), dump_(std::move(dump)) {}
    const std::string& dump() const { return dump_; }

private:
    std::string dump_;
};

template <typename T>
class Pretrainer {
public:
    Pretrainer(const PretrainConfig& cfg, std::uint64_t seed)
        : cfg_((cfg.validate(), cfg)), init_rng_(seed), model_(cfg.model, init_rng_), rng_(init_rng_.fork()),
          noam_{cfg.schedule.warmup, cfg.schedule.peak_lr},
          temp_(TemperatureSchedule::annealed_over(cfg.objective.tau_start, cfg.objective.tau_end, cfg.schedule.steps)),
          params_(collect(model_)), opt_(params_, cfg.schedule.adam) {}

    SslModel<T>& model() { return model_; }
    const PretrainConfig& config() const { return cfg_; }
    const std::vector<StepMetrics>& history() const { return history_; }

    // One optimizer update over `micro` (one entry per accumulated micro-batch).
    StepMetrics step(const std::vector<SequenceBatch<T>>& micro) {
        if (micro.empty()) throw std::invalid_argument("pretrain_step: no micro-batches");
        StepMetrics m;
        m.step = history_.size() + 1;
        m.lr = noam_.lr(m.step);
        m.tau = temp_.tau(m.step - 1);
        m.k_min = cfg_.objective.distractors;
        std::vector<std::vector<T>> grads(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) grads[i].assign(params_[i].numel(), T(0));
        const double share = 1.0 / static_cast<double>(micro.size());
        for (const auto& batch : micro) {
            auto out = ssl_forward(model_, batch, cfg_.objective, m.tau, rng_, true);
            m.contrastive += share * static_cast<double>(out.contrastive.item());
            m.diversity += share * static_cast<double>(out.diversity.item());
            m.total += share * static_cast<double>(out.total.item());
            m.perplexity += share * out.perplexity;
            m.masked_fraction += share * out.masked_fraction;
            m.k_min = std::min(m.k_min, out.stats.k_min);
            m.reduced_utterances += out.stats.reduced_utterances;
            if (!std::isfinite(m.total)) {
                history_.push_back(m);
                throw NonFiniteLossError(fmt::format("pretrain_step: non-finite loss at step {}", m.step), dump_history());
            }
            auto g = forward_backward(out.total, params_);
            for (std::size_t i = 0; i < params_.size(); ++i) {
                const auto& gi = g.at(i);
                for (std::size_t e = 0; e < gi.size(); ++e) grads[i][e] += static_cast<T>(share) * gi[e];
            }
        }
        m.grad_norm = opt_.step(grads, m.lr);
        history_.push_back(m);
        return m;
    }

    std::string dump_history() const {
        std::string s = metrics_csv_header() + "\n";
        for (const auto& h : history_) s += metrics_csv_row(h) + "\n";
        return s;
    }

    void write_metrics_csv(const std::string& path) const {
        std::ofstream o(path);
        if (!o) throw std::runtime_error("cannot write " + path);
        o << dump_history();
    }

private:
    static std::vector<Tensor<T>> collect(SslModel<T>& m) {
        std::vector<Tensor<T>> out;
        m.visit("", [&](const std::string&, Tensor<T>& t) { out.push_back(t); });
        return out;
    }

    PretrainConfig cfg_;
    RandomStream init_rng_;
    SslModel<T> model_;
    RandomStream rng_;
    NoamSchedule noam_;
    TemperatureSchedule temp_;
    std::vector<Tensor<T>> params_;
    AdamW<T> opt_;
    std::vector<StepMetrics> history_;
};

template <typename T>
FeatureCorpus<T> make_corpus(const PretrainConfig& cfg, const std::vector<std::string>& wavs = {}) {
    if (!wavs.empty()) return FeatureCorpus<T>::from_wavs(wavs, cfg.model.fbank);
    frontend::SyntheticSpeechConfig s;
    s.sample_rate = static_cast<std::uint32_t>(cfg.model.fbank.sample_rate_hz);
    s.inventory = cfg.data.inventory;
    s.successor_prob = cfg.data.successor_prob;
    return FeatureCorpus<T>::synthetic(cfg.data.corpus_size, cfg.data.seconds, cfg.data.data_seed, cfg.model.fbank, s);
}

// Runs `steps` updates, drawing micro-batches from `corpus`; `on_step` sees
// every metrics record as it is produced.
template <typename T, typename OnStep>
void pretrain(Pretrainer<T>& trainer, const FeatureCorpus<T>& corpus, std::size_t steps, RandomStream& data_rng,
              OnStep&& on_step) {
    const auto& c = trainer.config();
    for (std::size_t s = 0; s < steps; ++s) {
        std::vector<SequenceBatch<T>> micro;
        for (std::size_t a = 0; a < c.schedule.accumulation; ++a) micro.push_back(corpus.sample_batch(c.data.utterances, data_rng));
        on_step(trainer.step(micro));
    }
}

} // namespace summix::ssl

#endif
