// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_CONFORMER_CHECKPOINT_HPP
#define SUMMIX_CONFORMER_CHECKPOINT_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "summix/numcore/params.hpp"

// Container layout, all integers little-endian:
//   "SMXCKPT\0" | u32 version | u32 n | n bytes of JSON config
//   | u32 tensor count | per tensor: u32 name length, name, u32 rank,
//     rank x u64 dims, float32 values.
namespace summix::checkpoint {

inline constexpr char kMagic[8] = {'S', 'M', 'X', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RawTensor {
    Shape shape;
    std::vector<float> values;
};

struct Contents {
    nlohmann::json config;
    std::vector<std::pair<std::string, RawTensor>> tensors;

    const RawTensor& get(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return t;
        throw CheckpointError("checkpoint: missing tensor '" + name + "'");
    }
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename U>
void put(std::ostream& o, U v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U get(std::istream& in) {
    U v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(U))) throw CheckpointError("checkpoint: truncated file");
    return v;
}

} // namespace detail

inline void write(const std::string& path, const Contents& c) {
    std::ofstream o(path, std::ios::binary);
    if (!o) throw CheckpointError("checkpoint: cannot open " + path + " for writing");
    o.write(kMagic, sizeof(kMagic));
    detail::put<std::uint32_t>(o, kVersion);
    const std::string cfg = c.config.dump();
    detail::put<std::uint32_t>(o, static_cast<std::uint32_t>(cfg.size()));
    o.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    detail::put<std::uint32_t>(o, static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto& [name, t] : c.tensors) {
        detail::put<std::uint32_t>(o, static_cast<std::uint32_t>(name.size()));
        o.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put<std::uint32_t>(o, static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) detail::put<std::uint64_t>(o, d);
        o.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(float)));
    }
    if (!o) throw CheckpointError("checkpoint: write to " + path + " failed");
}

inline Contents read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("checkpoint: cannot open " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw CheckpointError("checkpoint: " + path + " has a bad magic header");
    const auto version = detail::get<std::uint32_t>(in);
    if (version != kVersion) throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
    Contents c;
    std::string cfg(detail::get<std::uint32_t>(in), '\0');
    if (!in.read(cfg.data(), static_cast<std::streamsize>(cfg.size()))) throw CheckpointError("checkpoint: truncated config");
    c.config = nlohmann::json::parse(cfg);
    const auto count = detail::get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name(detail::get<std::uint32_t>(in), '\0');
        if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) throw CheckpointError("checkpoint: truncated name");
        RawTensor t;
        t.shape.resize(detail::get<std::uint32_t>(in));
        for (auto& d : t.shape) d = static_cast<std::size_t>(detail::get<std::uint64_t>(in));
        t.values.resize(shape_numel(t.shape));
        if (!in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(float))))
            throw CheckpointError("checkpoint: truncated tensor '" + name + "'");
        c.tensors.emplace_back(std::move(name), std::move(t));
    }
    return c;
}

template <typename P>
Contents capture(P& params, nlohmann::json config, const std::string& prefix = "") {
    using T = typename P::value_type;
    Contents c{std::move(config), {}};
    params.visit(prefix, [&](const std::string& n, Tensor<T>& t) {
        c.tensors.emplace_back(n, RawTensor{t.shape(), std::vector<float>(t.values().begin(), t.values().end())});
    });
    return c;
}

// Overwrites every parameter in `params` from the checkpoint; shapes must match.
template <typename P>
void restore(P& params, const Contents& c, const std::string& prefix = "") {
    using T = typename P::value_type;
    params.visit(prefix, [&](const std::string& n, Tensor<T>& t) {
        const auto& raw = c.get(n);
        if (raw.shape != t.shape()) {
            throw CheckpointError("checkpoint: tensor '" + n + "' has shape " + shape_str(raw.shape) + ", model expects " +
                                  shape_str(t.shape()));
        }
        auto dst = t.mutable_data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(raw.values[i]);
    });
}

} // namespace summix::checkpoint

#endif
