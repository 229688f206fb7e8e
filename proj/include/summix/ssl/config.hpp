// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_SSL_CONFIG_HPP
#define SUMMIX_SSL_CONFIG_HPP

#include <charconv>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "summix/ssl/trainer.hpp"

namespace summix {

// Flat "section.key" registry binding text values to config fields. Used for
// INI files, --set overrides, --help listings and the resolved-config echo.
class ConfigRegistry {
public:
    struct Key {
        std::string name;
        std::string help;
        std::function<void(const std::string&)> set;
        std::function<std::string()> get;
    };

    void add(Key k) { keys_.push_back(std::move(k)); }
    const std::vector<Key>& keys() const { return keys_; }

    template <typename V>
    void bind(const std::string& name, V& field, const std::string& help) {
        add({name, help, [&field, name](const std::string& s) { field = parse_value<V>(name, s); },
             [&field] { return format_value(field); }});
    }

    void set(const std::string& name, const std::string& value) const {
        for (const auto& k : keys_)
            if (k.name == name) return k.set(value);
        throw ConfigError("unknown config key '" + name + "'");
    }

    // "section.key=value"
    void apply_override(const std::string& assignment) const {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
        set(assignment.substr(0, eq), assignment.substr(eq + 1));
    }

    void apply_ini_stream(std::istream& in, const std::string& origin) const {
        boost::property_tree::ptree tree;
        try {
            boost::property_tree::read_ini(in, tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
        }
        for (const auto& [section, body] : tree) {
            if (body.empty()) throw ConfigError(origin + ": key '" + section + "' outside of any section");
            for (const auto& [key, value] : body) set(section + "." + key, value.data());
        }
    }

    void apply_ini_file(const std::string& path) const {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path);
        apply_ini_stream(in, path);
    }

    // Every key grouped by section, in registration order.
    std::string to_ini() const {
        std::string out, current;
        for (const auto& k : keys_) {
            const auto dot = k.name.find('.');
            const auto section = k.name.substr(0, dot);
            if (section != current) {
                out += (out.empty() ? "" : "\n") + fmt::format("[{}]\n", section);
                current = section;
            }
            out += fmt::format("{} = {}\n", k.name.substr(dot + 1), k.get());
        }
        return out;
    }

    std::string help_text() const {
        std::string out;
        for (const auto& k : keys_) out += fmt::format("  {:<28} {} (default {})\n", k.name, k.help, k.get());
        return out;
    }

private:
    template <typename V>
    static V parse_value(const std::string& name, const std::string& raw) {
        const std::string s = trim(raw);
        auto fail = [&] { return ConfigError(fmt::format("config key '{}': cannot parse '{}'", name, s)); };
        if constexpr (std::is_same_v<V, std::string>) {
            return s;
        } else if constexpr (std::is_same_v<V, bool>) {
            if (s == "true" || s == "1") return true;
            if (s == "false" || s == "0") return false;
            throw fail();
        } else if constexpr (std::is_same_v<V, MixerKind>) {
            return parse_mixer_kind(s);
        } else if constexpr (std::is_same_v<V, std::vector<std::size_t>>) {
            std::vector<std::size_t> out;
            std::stringstream ss(s);
            std::string item;
            while (std::getline(ss, item, ',')) out.push_back(parse_value<std::size_t>(name, item));
            if (out.empty()) throw fail();
            return out;
        } else {
            V v{};
            const auto* end = s.data() + s.size();
            auto [ptr, ec] = std::from_chars(s.data(), end, v);
            if (ec != std::errc() || ptr != end || s.empty()) throw fail();
            return v;
        }
    }

    template <typename V>
    static std::string format_value(const V& v) {
        if constexpr (std::is_same_v<V, std::string>) return v;
        else if constexpr (std::is_same_v<V, bool>) return v ? "true" : "false";
        else if constexpr (std::is_same_v<V, MixerKind>) return to_string(v);
        else if constexpr (std::is_same_v<V, std::vector<std::size_t>>) return fmt::format("{}", fmt::join(v, ","));
        else if constexpr (std::is_floating_point_v<V>) return fmt::format("{}", v);
        else return std::to_string(v);
    }

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
    }

    std::vector<Key> keys_;
};

namespace ssl {

// Binds every [model], [objective], [schedule] and [data] field of `c`.
inline void register_pretrain_keys(ConfigRegistry& r, PretrainConfig& c) {
    auto& m = c.model;
    r.bind("model.mixer_kind", m.encoder.mixer_kind, "summary_mixing or mhsa");
    r.bind("model.n_layers", m.encoder.n_layers, "Conformer layers");
    r.bind("model.d_model", m.encoder.d_model, "encoder width");
    r.bind("model.mlp_hidden", m.encoder.mlp_hidden, "feed-forward hidden width");
    r.bind("model.conv_kernel", m.encoder.conv_kernel, "depthwise convolution kernel (odd)");
    r.bind("model.n_heads", m.encoder.n_heads, "attention heads / SummaryMixing heads");
    r.bind("model.summary_dim", m.encoder.sm_summary_dim, "SummaryMixing summary width, 0 = d_model");
    r.bind("model.summary_hidden", m.encoder.sm_hidden, "SummaryMixing s/f/c hidden width, 0 = d_model");
    r.bind("model.dropout", m.encoder.dropout, "encoder dropout");
    r.bind("model.n_mels", m.fbank.n_mels, "filterbank channels");
    r.bind("model.cnn_channels", m.cnn.channels, "frontend CNN channels (= encoder input width)");
    r.bind("model.cnn_kernel_sizes", m.cnn.kernel_sizes, "frontend CNN kernels, comma separated");
    r.bind("model.cnn_strides", m.cnn.strides, "frontend CNN strides, comma separated");
    r.bind("model.codebook_groups", m.heads.groups, "quantizer groups G");
    r.bind("model.codebook_entries", m.heads.entries, "entries per group V");
    r.bind("model.codeword_dim", m.heads.codeword_dim, "concatenated codeword width");
    r.bind("model.final_dim", m.heads.final_dim, "contrastive comparison width");
    auto& o = c.objective;
    r.bind("objective.mask_prob", o.mask.prob, "fraction of frames drawn as span starts");
    r.bind("objective.mask_span", o.mask.span, "frames per masked span");
    r.bind("objective.min_masks", o.mask.min_masks, "minimum spans per utterance");
    r.bind("objective.distractors", o.distractors, "distractors K per masked frame");
    r.bind("objective.kappa", o.kappa, "contrastive temperature");
    r.bind("objective.diversity_weight", o.diversity_weight, "diversity loss weight alpha");
    r.bind("objective.tau_start", o.tau_start, "initial Gumbel temperature");
    r.bind("objective.tau_end", o.tau_end, "final Gumbel temperature");
    auto& s = c.schedule;
    r.bind("schedule.steps", s.steps, "optimizer updates");
    r.bind("schedule.warmup", s.warmup, "Noam warmup steps");
    r.bind("schedule.peak_lr", s.peak_lr, "learning rate at step = warmup");
    r.bind("schedule.accumulation", s.accumulation, "micro-batches per update");
    r.bind("schedule.beta1", s.adam.beta1, "AdamW beta1");
    r.bind("schedule.beta2", s.adam.beta2, "AdamW beta2");
    r.bind("schedule.eps", s.adam.eps, "AdamW epsilon");
    r.bind("schedule.weight_decay", s.adam.weight_decay, "decoupled weight decay");
    r.bind("schedule.clip_norm", s.adam.clip_norm, "global gradient-norm clip, 0 = off");
    auto& d = c.data;
    r.bind("data.utterances", d.utterances, "utterances per micro-batch");
    r.bind("data.seconds", d.seconds, "synthetic utterance length");
    r.bind("data.corpus_size", d.corpus_size, "synthetic utterances generated up front");
    r.bind("data.data_seed", d.data_seed, "seed of the synthetic corpus");
    r.bind("data.inventory", d.inventory, "synthetic unit inventory");
    r.bind("data.successor_prob", d.successor_prob, "synthetic unit grammar strength");
    r.bind("data.wav_list", d.wav_list, "file listing 16 kHz mono WAV paths (replaces synthetic data)");
}

// The CNN input width follows n_mels and the encoder input follows the CNN.
inline void sync_derived(PretrainConfig& c) {
    c.model.cnn.in_features = c.model.fbank.n_mels;
    c.model.encoder.input_dim = c.model.cnn.channels;
}

inline PretrainConfig toy_pretrain_config(MixerKind kind) {
    PretrainConfig c;
    c.model = toy_config(kind);
    return c;
}

// 30k warmup; 300k updates; accumulation of 4.
inline PretrainConfig paper_pretrain_config(MixerKind kind) {
    PretrainConfig c;
    c.model = paper_config(kind);
    c.objective.distractors = 100;
    c.schedule.warmup = 30000;
    c.schedule.steps = 300000;
    c.schedule.accumulation = 4;
    return c;
}

} // namespace ssl
} // namespace summix

#endif
