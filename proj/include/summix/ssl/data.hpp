// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_SSL_DATA_HPP
#define SUMMIX_SSL_DATA_HPP

#include <cmath>
#include <string>
#include <vector>

#include "summix/frontend/fbank.hpp"
#include "summix/frontend/synthetic.hpp"
#include "summix/frontend/wav.hpp"
#include "summix/mixers/sequence_batch.hpp"

namespace summix::ssl {

// Per-utterance mean and variance normalization of every feature column.
template <typename T>
Tensor<T> normalize_features(const Tensor<T>& x) {
    const std::size_t n = x.dim(0), d = x.dim(1);
    std::vector<T> out = x.values();
    for (std::size_t j = 0; j < d; ++j) {
        double mu = 0, var = 0;
        for (std::size_t i = 0; i < n; ++i) mu += static_cast<double>(out[i * d + j]);
        mu /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double e = static_cast<double>(out[i * d + j]) - mu;
            var += e * e;
        }
        const double inv = 1.0 / std::sqrt(var / static_cast<double>(n) + 1e-5);
        for (std::size_t i = 0; i < n; ++i) out[i * d + j] = static_cast<T>((static_cast<double>(out[i * d + j]) - mu) * inv);
    }
    return Tensor<T>(x.shape(), std::move(out));
}

// Normalized filterbank features of a fixed pool of utterances, computed once.
template <typename T>
class FeatureCorpus {
public:
    FeatureCorpus() = default;
    explicit FeatureCorpus(std::vector<Tensor<T>> items) : items_(std::move(items)) {}

    static FeatureCorpus synthetic(std::size_t count, double seconds, std::uint64_t seed,
                                   const frontend::FbankConfig& fcfg = {}, const frontend::SyntheticSpeechConfig& scfg = {}) {
        frontend::SyntheticSpeech gen(scfg);
        frontend::Fbank fb(fcfg);
        RandomStream rng(seed);
        std::vector<Tensor<T>> items;
        for (std::size_t i = 0; i < count; ++i) {
            auto w = gen.generate(seconds, rng);
            items.push_back(normalize_features(fb.template operator()<T>(w.samples)));
        }
        return FeatureCorpus(std::move(items));
    }

    static FeatureCorpus from_wavs(const std::vector<std::string>& paths, const frontend::FbankConfig& fcfg = {}) {
        frontend::Fbank fb(fcfg);
        std::vector<Tensor<T>> items;
        for (const auto& p : paths) {
            auto w = frontend::read_wav(p);
            if (w.sample_rate != fcfg.sample_rate_hz) {
                throw frontend::WavError(p + ": sample rate " + std::to_string(w.sample_rate) + " Hz, expected " +
                                         std::to_string(fcfg.sample_rate_hz));
            }
            items.push_back(normalize_features(fb.template operator()<T>(w.samples)));
        }
        return FeatureCorpus(std::move(items));
    }

    std::size_t size() const { return items_.size(); }
    const Tensor<T>& operator[](std::size_t i) const { return items_.at(i); }

    SequenceBatch<T> batch(const std::vector<std::size_t>& idx) const {
        std::vector<Tensor<T>> sel;
        for (auto i : idx) sel.push_back(items_.at(i));
        return pad_sequences(sel);
    }

    SequenceBatch<T> sample_batch(std::size_t n, RandomStream& rng) const {
        if (items_.empty()) throw std::logic_error("FeatureCorpus: empty corpus");
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; ++i) idx.push_back(static_cast<std::size_t>(rng.below(items_.size())));
        return batch(idx);
    }

private:
    std::vector<Tensor<T>> items_;
};

} // namespace summix::ssl

#endif
