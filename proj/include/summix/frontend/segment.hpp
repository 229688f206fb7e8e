// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_FRONTEND_SEGMENT_HPP
#define SUMMIX_FRONTEND_SEGMENT_HPP

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace summix::frontend {

// Already-clipped durations of one recording, in temporal order.
struct ClipManifest {
    std::string recording_id;
    std::vector<double> clip_durations;
};

// One training sequence built from adjacent clips.
struct PackedSequence {
    std::vector<double> clips;

    double duration() const { return std::accumulate(clips.begin(), clips.end(), 0.0); }
};

class ManifestError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Greedy left-to-right packing:
//  - clips longer than `discard_over_s` are dropped and break adjacency;
//  - clips in (max_len_s, discard_over_s] are emitted on their own;
//  - otherwise the next clip joins the open sequence while the total stays
//    within max_len_s (inclusive).
// Zero-length clips carry no audio and are skipped.
inline std::vector<PackedSequence> segment_clips(const ClipManifest& manifest, double max_len_s = 30.0,
                                                 double discard_over_s = 60.0) {
    constexpr double slack = 1e-9;
    for (double d : manifest.clip_durations) {
        if (!(d >= 0.0) || !std::isfinite(d)) {
            throw ManifestError("segment_clips: recording '" + manifest.recording_id + "' has invalid duration " +
                                fmt::format("{}", d));
        }
    }
    std::vector<PackedSequence> out;
    PackedSequence open;
    double open_total = 0.0;
    auto flush = [&] {
        if (!open.clips.empty()) out.push_back(std::move(open));
        open = {};
        open_total = 0.0;
    };
    for (double d : manifest.clip_durations) {
        if (d == 0.0) continue;
        if (d > discard_over_s) {
            flush();
        } else if (d > max_len_s) {
            flush();
            out.push_back({{d}});
        } else if (!open.clips.empty() && open_total + d <= max_len_s + slack) {
            open.clips.push_back(d);
            open_total += d;
        } else {
            flush();
            open.clips.push_back(d);
            open_total = d;
        }
    }
    flush();
    return out;
}

struct SegmentationSummary {
    double total_hours_in = 0.0;
    double total_hours_out = 0.0;
    std::size_t discarded_count = 0;

    nlohmann::json to_json() const {
        return {{"total_hours_in", total_hours_in},
                {"total_hours_out", total_hours_out},
                {"discarded_count", discarded_count}};
    }
};

inline void tally(SegmentationSummary& s, const ClipManifest& m, const std::vector<PackedSequence>& packed,
                  double discard_over_s = 60.0) {
    for (double d : m.clip_durations) {
        s.total_hours_in += d / 3600.0;
        if (d > discard_over_s) ++s.discarded_count;
    }
    for (const auto& p : packed) s.total_hours_out += p.duration() / 3600.0;
}

// `recording_id<TAB>d1,d2,...` per line; blank lines and lines starting with
// '#' are ignored.
inline std::vector<ClipManifest> parse_manifest(std::istream& in) {
    std::vector<ClipManifest> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ManifestError("manifest line " + std::to_string(lineno) + ": expected '<id><TAB><durations>'");
        }
        ClipManifest m{line.substr(0, tab), {}};
        std::stringstream ss(line.substr(tab + 1));
        std::string item;
        while (std::getline(ss, item, ',')) {
            std::size_t used = 0;
            double v = 0;
            try {
                v = std::stod(item, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != item.size()) {
                throw ManifestError("manifest line " + std::to_string(lineno) + ": bad duration '" + item + "'");
            }
            if (v < 0) throw ManifestError("manifest line " + std::to_string(lineno) + ": negative duration");
            m.clip_durations.push_back(v);
        }
        out.push_back(std::move(m));
    }
    return out;
}

inline std::string format_durations(const std::vector<double>& ds) {
    std::string s;
    for (std::size_t i = 0; i < ds.size(); ++i) s += (i ? "," : "") + fmt::format("{}", ds[i]);
    return s;
}

// Same layout as the manifest, one line per recording, listing the packed
// sequence durations.
inline void write_segments(std::ostream& out, const std::string& recording_id, const std::vector<PackedSequence>& seqs) {
    std::vector<double> ds;
    for (const auto& p : seqs) ds.push_back(p.duration());
    out << recording_id << '\t' << format_durations(ds) << '\n';
}

} // namespace summix::frontend

#endif
