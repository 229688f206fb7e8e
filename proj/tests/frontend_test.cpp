#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "summix/frontend/cnn1d.hpp"
#include "summix/frontend/fbank.hpp"
#include "summix/frontend/segment.hpp"
#include "summix/frontend/synthetic.hpp"
#include "summix/frontend/wav.hpp"

using namespace summix;
using namespace summix::frontend;

namespace {

std::vector<double> durations(const std::vector<PackedSequence>& seqs) {
    std::vector<double> out;
    for (const auto& s : seqs) out.push_back(s.duration());
    return out;
}

// Rule simulation written independently of segment_clips: split the recording
// into runs separated by discarded clips, then walk each run.
std::vector<std::vector<double>> oracle_segment(const std::vector<double>& clips, double cap = 30, double discard = 60) {
    std::vector<std::vector<double>> runs(1);
    for (double d : clips) {
        if (d > discard) runs.emplace_back();
        else if (d > 0) runs.back().push_back(d);
    }
    std::vector<std::vector<double>> out;
    for (const auto& run : runs) {
        std::vector<double> cur;
        double total = 0;
        for (double d : run) {
            const bool standalone = d > cap;
            if (standalone || (!cur.empty() && total + d > cap + 1e-9)) {
                if (!cur.empty()) out.push_back(cur);
                cur.clear();
                total = 0;
            }
            if (standalone) {
                out.push_back({d});
                continue;
            }
            cur.push_back(d);
            total += d;
        }
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

std::vector<double> random_manifest(RandomStream& rng) {
    std::vector<double> clips(1 + rng.below(12));
    for (auto& d : clips) {
        switch (rng.below(6)) {
        case 0: d = rng.uniform(30.0, 60.0); break;
        case 1: d = rng.uniform(60.0, 120.0); break;
        case 2: d = static_cast<double>(rng.below(4) * 10); break;  // exact boundaries, incl. 0 and 30
        default: d = rng.uniform(0.5, 25.0); break;
        }
    }
    return clips;
}

} // namespace

TEST(Segment, RecordingOfTenTenThirtyFive) {
    auto out = segment_clips({"r", {10, 10, 35}});
    EXPECT_EQ(durations(out), (std::vector<double>{20, 35}));
}

TEST(Segment, SingleLongClipIsDiscarded) { EXPECT_TRUE(segment_clips({"r", {70}}).empty()); }

TEST(Segment, DiscardedClipBreaksAdjacency) {
    auto out = segment_clips({"r", {40, 70, 10, 10, 10}});
    EXPECT_EQ(durations(out), (std::vector<double>{40, 30}));
    // Without the break the 25 s clip would have joined the 5 s one.
    EXPECT_EQ(durations(segment_clips({"r", {5, 61, 25}})), (std::vector<double>{5, 25}));
}

TEST(Segment, ExactlyThirtyIsAllowed) {
    EXPECT_EQ(durations(segment_clips({"r", {15, 15, 0.5}})), (std::vector<double>{30, 0.5}));
}

TEST(Segment, NegativeOrNanDurationThrows) {
    EXPECT_THROW(segment_clips({"r", {1, -2}}), ManifestError);
    EXPECT_THROW(segment_clips({"r", {std::nan("")}}), ManifestError);
}

TEST(Segment, MatchesRuleOracleOnRandomManifests) {
    RandomStream rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto clips = random_manifest(rng);
        const auto got = segment_clips({"r", clips});
        const auto want = oracle_segment(clips);
        ASSERT_EQ(got.size(), want.size()) << "trial " << trial;
        for (std::size_t i = 0; i < got.size(); ++i) ASSERT_EQ(got[i].clips, want[i]) << "trial " << trial;

        double longest = 0, surviving = 0, emitted = 0;
        for (double d : clips)
            if (d <= 60) {
                longest = std::max(longest, d);
                surviving += d;
            }
        for (const auto& s : got) {
            emitted += s.duration();
            EXPECT_LE(s.duration(), std::max(30.0, longest) + 1e-9);
            if (s.clips.size() > 1) {
                EXPECT_LE(s.duration(), 30.0 + 1e-9);
            }
            for (double d : s.clips) {
                EXPECT_LE(d, 60.0);
                if (d > 30) {
                    EXPECT_EQ(s.clips.size(), 1u);
                }
            }
        }
        EXPECT_LE(emitted, surviving + 1e-9);

        auto padded = clips;
        padded.push_back(0.0);
        const auto again = segment_clips({"r", padded});
        ASSERT_EQ(again.size(), got.size());
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(again[i].clips, got[i].clips);
    }
}

TEST(Segment, ManifestRoundTrip) {
    std::istringstream in("# comment\nrec1\t10,10,35\n\nrec2\t70\n");
    auto ms = parse_manifest(in);
    ASSERT_EQ(ms.size(), 2u);
    std::ostringstream out;
    SegmentationSummary sum;
    for (const auto& m : ms) {
        auto seqs = segment_clips(m);
        write_segments(out, m.recording_id, seqs);
        tally(sum, m, seqs);
    }
    EXPECT_EQ(out.str(), "rec1\t20,35\nrec2\t\n");
    EXPECT_EQ(sum.discarded_count, 1u);
    EXPECT_NEAR(sum.total_hours_in, 125.0 / 3600, 1e-12);
    EXPECT_NEAR(sum.total_hours_out, 55.0 / 3600, 1e-12);
}

TEST(Segment, ManifestRejectsGarbage) {
    std::istringstream bad1("rec 10,20\n");
    EXPECT_THROW(parse_manifest(bad1), ManifestError);
    std::istringstream bad2("rec\t10,x\n");
    EXPECT_THROW(parse_manifest(bad2), ManifestError);
    std::istringstream bad3("rec\t10,-1\n");
    EXPECT_THROW(parse_manifest(bad3), ManifestError);
}

TEST(Fbank, FrameCount) {
    std::vector<float> one_second(16000, 0.0f);
    EXPECT_EQ(fbank(one_second).dim(0), 1 + (16000 - 400) / 160);
    EXPECT_EQ(fbank(one_second).dim(0), 98u);
    EXPECT_EQ(fbank(one_second).dim(1), 80u);
    EXPECT_EQ(fbank(std::vector<float>(400)).dim(0), 1u);
    EXPECT_EQ(fbank(std::vector<float>(559)).dim(0), 1u);
    EXPECT_EQ(fbank(std::vector<float>(560)).dim(0), 2u);
    EXPECT_THROW(fbank(std::vector<float>(399)), std::invalid_argument);
}

TEST(Fbank, SilenceHitsTheFloor) {
    auto f = fbank<double>(std::vector<float>(4000, 0.0f));
    for (double v : f.values()) EXPECT_EQ(v, std::log(1e-10));
}

TEST(Fbank, SinePeaksAtNearestMelCenter) {
    // Filter centers from the Mel-scale definition: 82 points equally spaced in
    // mel between 0 Hz and 8 kHz, the inner 80 being the peaks.
    const double top = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
    for (double hz : {1000.0, 440.0, 3000.0}) {
        std::size_t nearest = 0;
        double best = 1e300;
        for (std::size_t m = 0; m < 80; ++m) {
            const double mel = top * static_cast<double>(m + 1) / 81.0;
            const double c = 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
            if (std::abs(c - hz) < best) {
                best = std::abs(c - hz);
                nearest = m;
            }
        }
        auto f = fbank<double>(sine_wave(hz, 0.5).samples);
        for (std::size_t t = 0; t < f.dim(0); ++t) {
            const auto row = f.data().subspan(t * 80, 80);
            const auto arg = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
            ASSERT_EQ(arg, nearest) << hz << " Hz, frame " << t;
        }
    }
}

TEST(Fbank, DeterministicAndShiftConsistent) {
    RandomStream rng(3);
    auto w = SyntheticSpeech().generate(0.5, rng);
    auto a = fbank<double>(w.samples);
    auto b = fbank<double>(w.samples);
    EXPECT_EQ(a.values(), b.values());
    std::vector<float> shifted(w.samples.begin() + 160, w.samples.end());
    auto c = fbank<double>(shifted);
    ASSERT_EQ(c.dim(0) + 1, a.dim(0));
    for (std::size_t t = 0; t < c.dim(0); ++t)
        for (std::size_t m = 0; m < 80; ++m) EXPECT_EQ(c.values()[t * 80 + m], a.values()[(t + 1) * 80 + m]);
}

TEST(Fbank, RejectsBadConfig) {
    FbankConfig cfg;
    cfg.hop_ms = 30;
    EXPECT_THROW(Fbank{cfg}, std::invalid_argument);
    cfg = {};
    cfg.n_mels = 0;
    EXPECT_THROW(Fbank{cfg}, std::invalid_argument);
}

TEST(Cnn1d, LengthsAndChannels) {
    Cnn1dConfig cfg;
    RandomStream rng(1);
    Cnn1dParams<float> p(cfg, rng);
    for (std::size_t t : {98u, 1u, 2u, 7u}) {
        auto x = SequenceBatch<float>::dense(Tensor<float>::normal({1, t, 80}, 1.0f, rng));
        auto y = cnn1d_downsample(x, cfg, p);
        EXPECT_EQ(y.frames(), (t + 1) / 2);
        EXPECT_EQ(y.width(), 512u);
    }
    auto x = SequenceBatch<float>::dense(Tensor<float>::zeros({1, 98, 80}));
    EXPECT_EQ(cnn1d_downsample(x, cfg, p).frames(), 49u);
}

TEST(Cnn1d, TwentyMillisecondLatentRate) {
    FbankConfig f;
    Cnn1dConfig c;
    EXPECT_DOUBLE_EQ(f.hop_ms * static_cast<double>(c.total_stride()), 20.0);
}

TEST(Cnn1d, ZeroInputZeroBiasGivesZeroPreActivation) {
    Cnn1dConfig cfg;
    RandomStream rng(2);
    Cnn1dParams<double> p(cfg, rng);
    auto x = Tensor<double>::zeros({1, 10, 80});
    auto pre = ops::conv1d(x, p.w[0], Tensor<double>::zeros({512}), 2);
    for (double v : pre.values()) EXPECT_EQ(v, 0.0);
}

TEST(Cnn1d, WidthMismatchThrows) {
    Cnn1dConfig cfg;
    RandomStream rng(2);
    Cnn1dParams<float> p(cfg, rng);
    auto x = SequenceBatch<float>::dense(Tensor<float>::zeros({1, 10, 40}));
    EXPECT_THROW(cnn1d_downsample(x, cfg, p), ShapeError);
}

TEST(Cnn1d, MaskFollowsCenterFrameAndPaddingIsInert) {
    Cnn1dConfig cfg;
    cfg.channels = 16;
    RandomStream rng(5);
    Cnn1dParams<double> p(cfg, rng);
    auto feats = Tensor<double>::normal({7, 80}, 1.0, rng);
    auto alone = cnn1d_downsample(pad_sequences<double>({feats}), cfg, p);

    auto longer = Tensor<double>::normal({12, 80}, 1.0, rng);
    auto batch = pad_sequences<double>({feats, longer});
    // Garbage in the padding must not leak.
    std::vector<double> v = batch.values.values();
    for (std::size_t t = 7; t < 12; ++t)
        for (std::size_t c = 0; c < 80; ++c) v[t * 80 + c] = 1e3;
    batch = SequenceBatch<double>(Tensor<double>(batch.values.shape(), v), batch.mask);
    auto out = cnn1d_downsample(batch, cfg, p);
    ASSERT_EQ(out.frames(), 6u);
    for (std::size_t s = 0; s < 6; ++s) EXPECT_EQ(out.valid(0, s), s * 2 < 7) << s;
    for (std::size_t s = 0; s < alone.frames(); ++s)
        for (std::size_t c = 0; c < 16; ++c)
            EXPECT_NEAR(out.values.values()[s * 16 + c], alone.values.values()[s * 16 + c], 1e-12);
}

TEST(Wav, RoundTrip) {
    RandomStream rng(9);
    auto w = SyntheticSpeech().generate(0.25, rng);
    const auto path = (std::filesystem::temp_directory_path() / "summix_wav_roundtrip.wav").string();
    write_wav(path, w);
    auto r = read_wav(path);
    std::remove(path.c_str());
    EXPECT_EQ(r.sample_rate, 16000u);
    ASSERT_EQ(r.samples.size(), w.samples.size());
    for (std::size_t i = 0; i < r.samples.size(); ++i) EXPECT_NEAR(r.samples[i], w.samples[i], 1.0 / 32768);
}

TEST(Synthetic, SeededAndBounded) {
    RandomStream a(4), b(4);
    SyntheticSpeech gen;
    auto x = gen.generate(1.0, a);
    auto y = gen.generate(1.0, b);
    EXPECT_EQ(x.samples, y.samples);
    for (float s : x.samples) EXPECT_LT(std::abs(s), 1.0f);
}
