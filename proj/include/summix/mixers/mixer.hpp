// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_MIXERS_MIXER_HPP
#define SUMMIX_MIXERS_MIXER_HPP

#include <stdexcept>
#include <string>
#include <variant>

#include "summix/mixers/mhsa.hpp"
#include "summix/mixers/summary_mixing.hpp"

namespace summix {

enum class MixerKind { summary_mixing, mhsa };

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline std::string to_string(MixerKind k) { return k == MixerKind::mhsa ? "mhsa" : "summary_mixing"; }

inline MixerKind parse_mixer_kind(const std::string& s) {
    if (s == "mhsa") return MixerKind::mhsa;
    if (s == "summary_mixing" || s == "summarymixing") return MixerKind::summary_mixing;
    throw ConfigError("unknown mixer kind '" + s + "' (expected summary_mixing or mhsa)");
}

// Weights for whichever token mixer fills the Conformer slot.
template <typename T>
struct MixerParams {
    using value_type = T;
    std::variant<SummaryMixingParams<T>, MhsaParams<T>> block;

    MixerKind kind() const { return block.index() == 0 ? MixerKind::summary_mixing : MixerKind::mhsa; }

    void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
        std::visit([&](auto& b) { b.visit(prefix, fn); }, block);
    }
};

// Runs the mixer named by `kind`; asking for a kind the parameters do not hold
// is a configuration error.
template <typename T>
SequenceBatch<T> mixer_forward(const SequenceBatch<T>& x, const MixerParams<T>& p, MixerKind kind) {
    if (kind != p.kind()) {
        throw ConfigError("mixer_forward: layer holds " + to_string(p.kind()) + " weights, asked for " + to_string(kind));
    }
    if (kind == MixerKind::mhsa) return mhsa_forward(x, std::get<MhsaParams<T>>(p.block));
    return summary_mixing_forward(x, std::get<SummaryMixingParams<T>>(p.block));
}

} // namespace summix

#endif
