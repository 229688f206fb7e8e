#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "summix/bench/bench.hpp"

namespace summix::bench {
namespace {

std::vector<BenchRecord> power_law(double c, double p, const std::vector<std::size_t>& ts) {
    std::vector<BenchRecord> r;
    for (auto t : ts) r.push_back({MixerKind::mhsa, t, 8, 5, c * std::pow(static_cast<double>(t), p), 0});
    return r;
}

// ---- slope fit ----------------------------------------------------------------------

TEST(Slope, ExactPowerLaws) {
    EXPECT_NEAR(fit_loglog_slope(power_law(3e-9, 2.0, {512, 1024, 2048, 4096})), 2.0, 1e-9);
    EXPECT_NEAR(fit_loglog_slope(power_law(7e-6, 1.0, {512, 1024, 2048, 4096})), 1.0, 1e-9);
    EXPECT_NEAR(fit_loglog_slope(power_law(1.0, 1.37, {3, 50, 51, 900, 10000})), 1.37, 1e-9);
}

TEST(Slope, QuadraticWithFivePercentNoiseStaysNearTwo) {
    // 2000 Monte-Carlo draws of multiplicative N(1, 0.05) noise on the five
    // doubling lengths; every fit must land in [1.9, 2.1].
    std::mt19937_64 gen(17);
    std::normal_distribution<double> noise(1.0, 0.05);
    double worst = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        auto r = power_law(1e-9, 2.0, {512, 1024, 2048, 4096, 8192});
        for (auto& b : r) b.median_seconds *= noise(gen);
        worst = std::max(worst, std::abs(fit_loglog_slope(r) - 2.0));
    }
    EXPECT_LE(worst, 0.1);
}

TEST(Slope, RejectsNonPositiveTimesAndShortSeries) {
    auto r = power_law(1.0, 1.0, {1, 2, 3, 4});
    r[2].median_seconds = 0.0;
    EXPECT_THROW(fit_loglog_slope(r), std::invalid_argument);
    r[2].median_seconds = -1.0;
    EXPECT_THROW(fit_loglog_slope(r), std::invalid_argument);
    EXPECT_THROW(fit_loglog_slope(power_law(1.0, 1.0, {1, 2, 3})), std::invalid_argument);
}

// ---- analytic activation memory ----------------------------------------------------------

TEST(ActivationMemory, AttentionMatricesAlone) {
    // Only the T^2 term differs when d_model changes the linear terms away.
    auto c = mixer_bench_config(MixerKind::mhsa, 256, 8);
    EXPECT_EQ(mixer_activations(c, 2048) - 5 * 2048 * 256, 33554432u);
    EXPECT_EQ(33554432u, 8u * 2048u * 2048u);
}

TEST(ActivationMemory, SummaryMixingIsLinearInT) {
    for (std::size_t d : {64u, 256u, 768u})
        for (std::size_t t : {512u, 1000u, 1500u, 4096u}) {
            auto c = mixer_bench_config(MixerKind::summary_mixing, d, 8);
            const double r = static_cast<double>(activation_memory(c, 2 * t).total) / static_cast<double>(activation_memory(c, t).total);
            EXPECT_LE(r, 2.05) << "d=" << d << " T=" << t;
        }
}

TEST(ActivationMemory, FullScaleSummaryMixingBelowAttention) {
    auto sm = paper_config(MixerKind::summary_mixing).encoder;
    auto mh = paper_config(MixerKind::mhsa).encoder;
    EXPECT_LT(activation_memory(sm, 1500).total, activation_memory(mh, 1500).total);
}

template <typename T>
std::size_t live_layer_count(const EncoderConfig& cfg, std::size_t frames, std::size_t batch) {
    RandomStream rng(3);
    EncoderParams<T> p(cfg, rng);
    auto x = SequenceBatch<T>::dense(Tensor<T>::normal({batch, frames, cfg.input_dim}, 1.0, rng));
    // Parameters require gradients, so the attention weights are kept.
    ActivationCounter counter;
    auto outs = encoder_forward(x, cfg, p);
    return counter.count();
}

TEST(ActivationMemory, AnalyticCountMatchesLiveCounter) {
    for (auto kind : {MixerKind::summary_mixing, MixerKind::mhsa})
        for (std::size_t t : {5u, 17u, 40u})
            for (std::size_t b : {1u, 2u}) {
                auto cfg = mixer_bench_config(kind, 16, 4);
                cfg.n_layers = 2;
                cfg.mlp_hidden = 24;
                cfg.sm_hidden = 8;
                cfg.sm_summary_dim = 12;
                EXPECT_EQ(live_layer_count<double>(cfg, t, b), activation_memory(cfg, t, b).total)
                    << to_string(kind) << " T=" << t << " B=" << b;
            }
}

TEST(ActivationMemory, GapRatioTendsToFour) {
    double prev = INFINITY;
    for (std::size_t t : {1024u, 2048u, 4096u, 8192u, 65536u}) {
        const double r = activation_gap_ratio(256, 8, t);
        EXPECT_GT(r, 4.0);
        EXPECT_LT(r, prev);
        prev = r;
    }
    EXPECT_NEAR(activation_gap_ratio(256, 8, 1 << 20), 4.0, 1e-3);
}

// ---- timing harness -------------------------------------------------------------------

TEST(TimeScaling, RejectsBadLengthLists) {
    EXPECT_THROW(time_scaling(MixerKind::summary_mixing, {8, 16, 32}, 16), std::invalid_argument);
    EXPECT_THROW(time_scaling(MixerKind::summary_mixing, {8, 16, 16, 32}, 16), std::invalid_argument);
    EXPECT_THROW(time_scaling(MixerKind::summary_mixing, {8, 32, 16, 64}, 16), std::invalid_argument);
    TimingOptions few;
    few.repeats = 3;
    EXPECT_THROW(time_scaling(MixerKind::summary_mixing, {8, 16, 32, 64}, 16, few), std::invalid_argument);
}

TEST(TimeScaling, RecordsAreOrderedFiniteAndIncreasing) {
    for (auto kind : {MixerKind::summary_mixing, MixerKind::mhsa}) {
        const std::vector<std::size_t> lengths{256, 512, 1024, 2048};
        auto r = time_scaling(kind, lengths, 64);
        ASSERT_EQ(r.size(), 4u);
        for (std::size_t i = 0; i < 4; ++i) {
            EXPECT_EQ(r[i].frames, lengths[i]);
            EXPECT_EQ(r[i].mixer_kind, kind);
            EXPECT_EQ(r[i].repeats, 5u);
            EXPECT_TRUE(std::isfinite(r[i].median_seconds));
            EXPECT_GT(r[i].median_seconds, 0.0);
            if (i > 0) {
                EXPECT_GT(r[i].median_seconds, r[i - 1].median_seconds);
                EXPECT_GT(r[i].activation_elements, r[i - 1].activation_elements);
            }
        }
    }
}

TEST(TimeScaling, MedianIsStableAcrossRepeatCounts) {
    TimingOptions five, nine;
    nine.repeats = 9;
    const std::vector<std::size_t> lengths{1024, 2048, 4096, 8192};
    auto a = time_scaling(MixerKind::summary_mixing, lengths, 64, five);
    auto b = time_scaling(MixerKind::summary_mixing, lengths, 64, nine);
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        const double ratio = a[i].median_seconds / b[i].median_seconds;
        EXPECT_GT(ratio, 0.8);
        EXPECT_LT(ratio, 1.25);
    }
}

TEST(TimeScaling, BackwardModeRuns) {
    TimingOptions o;
    o.backward = true;
    auto r = time_scaling(MixerKind::mhsa, {16, 32, 64, 128}, 16, o);
    EXPECT_EQ(r.size(), 4u);
}

TEST(Summary, CsvLayoutAndVerdicts) {
    auto r = power_law(1e-9, 1.0, {1024, 2048, 4096, 8192});
    for (auto& b : r) b.mixer_kind = MixerKind::summary_mixing;
    auto q = power_law(1e-9, 2.0, {1024, 2048, 4096, 8192});
    r.insert(r.end(), q.begin(), q.end());
    const auto csv = records_csv(r);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "mixer,T,d_model,median_seconds,activation_elements");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
    const auto s = summarize(r);
    ASSERT_EQ(s.slopes.size(), 2u);
    EXPECT_NEAR(s.slopes[0].second, 1.0, 1e-9);
    EXPECT_NEAR(s.slopes[1].second, 2.0, 1e-9);
    ASSERT_EQ(s.gap_ratios.size(), 3u);  // T = 1024, 2048, 4096
    const auto j = s.to_json();
    EXPECT_TRUE(j["slopes"]["mhsa"]["pass"].get<bool>());
    EXPECT_TRUE(j["slopes"]["summary_mixing"]["pass"].get<bool>());
    EXPECT_EQ(j["pass"].get<bool>(), s.pass());
}

} // namespace
} // namespace summix::bench
