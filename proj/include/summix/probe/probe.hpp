// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_PROBE_PROBE_HPP
#define SUMMIX_PROBE_PROBE_HPP

#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "summix/conformer/encoder.hpp"
#include "summix/numcore/autodiff.hpp"
#include "summix/ssl/schedule.hpp"

namespace summix::probe {

// Softmax-weighted combination of the L + 1 encoder representations, then
// mean pooling and a linear classifier.
template <typename T>
struct ProbeParams {
    using value_type = T;
    Tensor<T> logits;      // [L + 1]
    LinearParams<T> head;  // D -> classes

    ProbeParams() = default;
    ProbeParams(std::size_t entries, std::size_t d, std::size_t classes, RandomStream& rng)
        : logits(Tensor<T>::zeros({entries}, true)), head(d, classes, rng) {
        if (entries == 0 || classes < 2) throw std::invalid_argument("probe: need at least one layer and two classes");
    }

    std::size_t entries() const { return logits.numel(); }
    std::size_t classes() const { return head.out_features(); }

    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        fn(join_name(prefix, "logits"), logits);
        head.visit(join_name(prefix, "head"), fn);
    }
};

// Normalized layer weights; they sum to one up to rounding.
template <typename T>
std::vector<double> layer_weights(const Tensor<T>& logits) {
    NoGradGuard ng;
    auto w = ops::softmax(logits.detach());
    return std::vector<double>(w.values().begin(), w.values().end());
}

// sum_l softmax(logits)_l * outputs_l, frame by frame.
template <typename T>
SequenceBatch<T> weighted_layer_sum(const LayerOutputs<T>& outputs, const Tensor<T>& logits) {
    if (outputs.empty() || logits.rank() != 1 || logits.numel() != outputs.size()) {
        throw std::invalid_argument(fmt::format("weighted_layer_sum: {} logits for {} layer outputs", logits.numel(), outputs.size()));
    }
    std::vector<Tensor<T>> xs;
    for (const auto& o : outputs) {
        if (o.values.shape() != outputs[0].values.shape()) throw ShapeError("weighted_layer_sum: layer outputs differ in shape");
        xs.push_back(o.values);
    }
    return outputs[0].with_values(ops::weighted_sum(xs, ops::softmax(logits)));
}

template <typename T>
Tensor<T> probe_logits(const LayerOutputs<T>& outputs, const ProbeParams<T>& p) {
    auto mixed = weighted_layer_sum(outputs, p.logits);
    return ops::linear(ops::masked_time_average(mixed.values, mixed.mask), p.head.w, p.head.b);
}

// Frozen encoder representations of a labelled set, one batch per entry.
template <typename T>
struct ProbeDataset {
    std::vector<LayerOutputs<T>> batches;
    std::vector<std::vector<std::size_t>> labels;
    std::size_t classes = 0;

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& l : labels) n += l.size();
        return n;
    }
};

struct ProbeConfig {
    std::size_t steps = 300;
    double lr = 0.05;
    std::uint64_t seed = 0;

    void validate() const {
        if (steps == 0) throw std::invalid_argument("probe: steps must be positive");
        if (!(lr > 0)) throw std::invalid_argument("probe: lr must be positive");
    }
};

template <typename T>
struct ProbeResult {
    ProbeParams<T> params;
    std::vector<double> weights;  // softmax(logits)
    double accuracy = 0;          // on the training set
    std::vector<double> loss_history;
};

class EncoderLeakError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename T>
double probe_accuracy(const ProbeDataset<T>& data, const ProbeParams<T>& p) {
    NoGradGuard ng;
    std::size_t right = 0;
    for (std::size_t b = 0; b < data.batches.size(); ++b) {
        const auto lg = probe_logits(data.batches[b], p);
        const std::size_t c = lg.dim(1);
        for (std::size_t i = 0; i < lg.dim(0); ++i) {
            const T* row = lg.values().data() + i * c;
            right += static_cast<std::size_t>(std::max_element(row, row + c) - row) == data.labels[b][i];
        }
    }
    return static_cast<double>(right) / static_cast<double>(data.size());
}

// Trains only the probe (layer logits and head) with Adam on the full set.
template <typename T>
ProbeResult<T> fit_probe(const ProbeDataset<T>& data, const ProbeConfig& cfg) {
    cfg.validate();
    if (data.batches.empty() || data.batches.size() != data.labels.size()) throw std::invalid_argument("probe: empty dataset");
    for (const auto& b : data.batches) {
        if (b.size() != data.batches[0].size()) throw std::invalid_argument("probe: batches disagree on the layer count");
        // The probe must never see a graph reaching back into the encoder.
        for (const auto& o : b)
            if (o.values.requires_grad()) throw EncoderLeakError("probe: layer outputs are attached to the encoder graph");
    }
    RandomStream rng(cfg.seed);
    ProbeResult<T> r;
    r.params = ProbeParams<T>(data.batches[0].size(), data.batches[0][0].width(), data.classes, rng);
    std::vector<Tensor<T>> params{r.params.logits, r.params.head.w, r.params.head.b};
    ssl::AdamWConfig ac;
    ac.weight_decay = 0.0;
    ssl::AdamW<T> opt(params, ac);
    const double share = 1.0 / static_cast<double>(data.batches.size());
    for (std::size_t s = 0; s < cfg.steps; ++s) {
        std::vector<std::vector<T>> grads;
        for (const auto& p : params) grads.emplace_back(p.numel(), T(0));
        double loss = 0;
        for (std::size_t b = 0; b < data.batches.size(); ++b) {
            auto l = ops::cross_entropy(probe_logits(data.batches[b], r.params), data.labels[b]);
            loss += share * static_cast<double>(l.item());
            auto g = forward_backward(l, params);
            for (std::size_t i = 0; i < params.size(); ++i)
                for (std::size_t e = 0; e < grads[i].size(); ++e) grads[i][e] += static_cast<T>(share) * g.at(i)[e];
        }
        r.loss_history.push_back(loss);
        opt.step(grads, cfg.lr);
    }
    r.weights = layer_weights(r.params.logits);
    r.accuracy = probe_accuracy(data, r.params);
    return r;
}

// Runs `encode(batch)` for every labelled batch with gradients off, fits the
// probe, and verifies that `encoder` is bit-identical afterwards.
template <typename T, typename Encoder, typename Encode>
ProbeResult<T> train_probe(Encoder& encoder, const std::vector<SequenceBatch<T>>& inputs,
                           const std::vector<std::vector<std::size_t>>& labels, std::size_t classes, Encode&& encode,
                           const ProbeConfig& cfg) {
    if (inputs.size() != labels.size()) throw std::invalid_argument("probe: one label list per batch expected");
    const auto before = snapshot(encoder);
    ProbeDataset<T> data;
    data.classes = classes;
    data.labels = labels;
    {
        NoGradGuard ng;
        for (const auto& x : inputs) data.batches.push_back(encode(x));
    }
    for (const auto& l : labels)
        for (auto y : l)
            if (y >= classes) throw std::invalid_argument("probe: label outside the head's label space");
    auto r = fit_probe(data, cfg);
    if (snapshot(encoder) != before) throw EncoderLeakError("probe: encoder parameters changed during probe training");
    return r;
}

// CSV: header `layer,<task>...`, one row per layer, one column per task.
inline std::string weight_heatmap_csv(const std::vector<std::pair<std::string, std::vector<double>>>& columns) {
    if (columns.empty()) throw std::invalid_argument("heatmap: no task columns");
    const std::size_t rows = columns[0].second.size();
    std::string out = "layer";
    for (const auto& [task, w] : columns) {
        if (w.size() != rows) throw std::invalid_argument("heatmap: task '" + task + "' has a different layer count");
        out += "," + task;
    }
    out += "\n";
    for (std::size_t l = 0; l < rows; ++l) {
        out += std::to_string(l);
        for (const auto& c : columns) out += fmt::format(",{:.9g}", c.second[l]);
        out += "\n";
    }
    return out;
}

inline void emit_weight_heatmap(const std::string& path, const std::vector<std::pair<std::string, std::vector<double>>>& columns) {
    const auto csv = weight_heatmap_csv(columns);
    std::ofstream o(path);
    if (!o) throw std::runtime_error("cannot write " + path);
    o << csv;
}

} // namespace summix::probe

#endif
