// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_FRONTEND_WAV_HPP
#define SUMMIX_FRONTEND_WAV_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace summix::frontend {

class WavError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Waveform {
    std::uint32_t sample_rate = 16000;
    std::vector<float> samples;  // mono, in [-1, 1)

    double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put32(std::ofstream& o, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    o.write(reinterpret_cast<const char*>(b), 4);
}
inline void put16(std::ofstream& o, std::uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    o.write(reinterpret_cast<const char*>(b), 2);
}

} // namespace detail

// Reads a RIFF/WAVE file holding 16-bit PCM mono audio.
inline Waveform read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WavError("read_wav: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw WavError("read_wav: " + path + " is not a RIFF/WAVE file");
    }
    Waveform w;
    bool have_fmt = false;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = detail::le32(bytes.data() + pos + 4);
        const unsigned char* body = bytes.data() + pos + 8;
        if (pos + 8 + len > bytes.size()) throw WavError("read_wav: truncated chunk in " + path);
        if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
            if (len < 16) throw WavError("read_wav: short fmt chunk");
            const auto format = detail::le16(body);
            const auto channels = detail::le16(body + 2);
            w.sample_rate = detail::le32(body + 4);
            const auto bits = detail::le16(body + 14);
            if (format != 1 || bits != 16) throw WavError("read_wav: only 16-bit PCM is supported");
            if (channels != 1) throw WavError("read_wav: only mono audio is supported");
            have_fmt = true;
        } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
            if (!have_fmt) throw WavError("read_wav: data chunk before fmt chunk");
            w.samples.resize(len / 2);
            for (std::size_t i = 0; i < w.samples.size(); ++i) {
                const auto raw = static_cast<std::int16_t>(detail::le16(body + 2 * i));
                w.samples[i] = static_cast<float>(raw) / 32768.0f;
            }
            return w;
        }
        pos += 8 + len + (len & 1);
    }
    throw WavError("read_wav: no data chunk in " + path);
}

inline void write_wav(const std::string& path, const Waveform& w) {
    std::ofstream o(path, std::ios::binary);
    if (!o) throw WavError("write_wav: cannot open " + path);
    const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
    o.write("RIFF", 4);
    detail::put32(o, 36 + data_bytes);
    o.write("WAVEfmt ", 8);
    detail::put32(o, 16);
    detail::put16(o, 1);
    detail::put16(o, 1);
    detail::put32(o, w.sample_rate);
    detail::put32(o, w.sample_rate * 2);
    detail::put16(o, 2);
    detail::put16(o, 16);
    o.write("data", 4);
    detail::put32(o, data_bytes);
    for (float s : w.samples) {
        const float c = std::clamp(s, -1.0f, 32767.0f / 32768.0f);
        detail::put16(o, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32768.0f))));
    }
}

} // namespace summix::frontend

#endif
