#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "summix/conformer/checkpoint.hpp"
#include "summix/probe/tasks.hpp"
#include "test_util.hpp"

namespace summix::probe {
namespace {

using testing_util::randn;
using TD = Tensor<double>;

LayerOutputs<double> random_outputs(std::size_t entries, std::size_t b, std::size_t t, std::size_t d, RandomStream& rng) {
    LayerOutputs<double> outs;
    for (std::size_t l = 0; l < entries; ++l) outs.push_back(SequenceBatch<double>::dense(randn({b, t, d}, rng)));
    return outs;
}

// ---- weighted layer sum ------------------------------------------------------------

TEST(WeightedLayerSum, EqualLogitsGiveArithmeticMean) {
    RandomStream rng(1);
    auto outs = random_outputs(4, 2, 3, 5, rng);
    auto y = weighted_layer_sum(outs, TD::full({4}, 0.7));
    for (std::size_t i = 0; i < y.values.numel(); ++i) {
        double mean = 0;
        for (const auto& o : outs) mean += o.values.values()[i] / 4.0;
        EXPECT_NEAR(y.values.values()[i], mean, 1e-14);
    }
}

TEST(WeightedLayerSum, LargeLogitSelectsOneLayer) {
    RandomStream rng(2);
    auto outs = random_outputs(5, 1, 4, 3, rng);
    for (std::size_t pick = 0; pick < 5; ++pick) {
        std::vector<double> lg(5, 0.0);
        lg[pick] = 40.0;
        auto y = weighted_layer_sum(outs, TD({5}, lg));
        EXPECT_LT(testing_util::max_abs_diff(y.values.values(), outs[pick].values.values()), 1e-6);
    }
}

TEST(WeightedLayerSum, MatchesDirectSummation) {
    RandomStream rng(3);
    auto outs = random_outputs(3, 1, 2, 2, rng);
    const std::vector<double> lg{0.3, -1.1, 0.8};
    auto y = weighted_layer_sum(outs, TD({3}, lg));
    const double z = std::exp(0.3) + std::exp(-1.1) + std::exp(0.8);
    for (std::size_t i = 0; i < 4; ++i) {
        double want = 0;
        for (std::size_t l = 0; l < 3; ++l) want += std::exp(lg[l]) / z * outs[l].values.values()[i];
        EXPECT_NEAR(y.values.values()[i], want, 1e-14);
    }
}

TEST(WeightedLayerSum, LinearInEachLayerOutput) {
    RandomStream rng(4);
    auto a = random_outputs(3, 2, 3, 2, rng);
    auto b = random_outputs(3, 2, 3, 2, rng);
    const TD lg({3}, {0.2, 1.0, -0.5});
    LayerOutputs<double> mix;
    for (std::size_t l = 0; l < 3; ++l) mix.push_back(a[l].with_values(ops::add(ops::scale(a[l].values, 2.0), ops::scale(b[l].values, -3.0))));
    auto ya = weighted_layer_sum(a, lg), yb = weighted_layer_sum(b, lg), ym = weighted_layer_sum(mix, lg);
    for (std::size_t i = 0; i < ym.values.numel(); ++i)
        EXPECT_NEAR(ym.values.values()[i], 2.0 * ya.values.values()[i] - 3.0 * yb.values.values()[i], 1e-12);
}

TEST(WeightedLayerSum, AddingAConstantToEveryLogitChangesNothing) {
    RandomStream rng(5);
    auto outs = random_outputs(4, 2, 2, 3, rng);
    auto y0 = weighted_layer_sum(outs, TD({4}, {0.1, -0.4, 2.0, 0.5}));
    auto y1 = weighted_layer_sum(outs, TD({4}, {7.1, 6.6, 9.0, 7.5}));
    EXPECT_LT(testing_util::max_abs_diff(y0.values.values(), y1.values.values()), 1e-13);
}

TEST(WeightedLayerSum, LengthMismatchIsRejected) {
    RandomStream rng(6);
    auto outs = random_outputs(3, 1, 2, 2, rng);
    EXPECT_THROW(weighted_layer_sum(outs, TD::zeros({4})), std::invalid_argument);
    EXPECT_THROW(weighted_layer_sum(outs, TD::zeros({2})), std::invalid_argument);
    EXPECT_THROW(weighted_layer_sum(LayerOutputs<double>{}, TD::zeros({0})), std::invalid_argument);
}

TEST(WeightedLayerSum, GradientReachesLogitsOnly) {
    RandomStream rng(7);
    auto outs = random_outputs(3, 1, 3, 2, rng);
    auto lg = TD({3}, {0.4, -0.2, 0.9}, true);
    auto loss = ops::sum(ops::mul(weighted_layer_sum(outs, lg).values, outs[1].values));
    auto g = forward_backward(loss, std::vector<TD>{lg});
    EXPECT_GT(std::abs(g.at(0)[1]), 0.0);
    double s = 0;
    for (double v : g.at(0)) s += v;
    EXPECT_NEAR(s, 0.0, 1e-12);  // softmax Jacobian rows sum to zero
}

TEST(LayerWeights, SumToOneForArbitraryLogits) {
    RandomStream rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        auto w = layer_weights(randn({13}, rng, 5.0));
        EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-15);
        for (double v : w) EXPECT_GE(v, 0.0);
    }
}

// ---- training on frozen representations ---------------------------------------------

ProbeDataset<double> separable_dataset(std::size_t informative, std::size_t entries, RandomStream& rng) {
    ProbeDataset<double> d;
    d.classes = 2;
    for (int b = 0; b < 3; ++b) {
        std::vector<std::size_t> labels;
        for (int i = 0; i < 8; ++i) labels.push_back(rng.below(2));
        auto outs = random_outputs(entries, 8, 5, 4, rng);
        auto v = outs[informative].values.values();
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t e = 0; e < 20; ++e) v[i * 20 + e] += labels[i] ? 1.5 : -1.5;
        outs[informative] = outs[informative].with_values(TD({8, 5, 4}, v));
        d.batches.push_back(outs);
        d.labels.push_back(labels);
    }
    return d;
}

TEST(FitProbe, FindsTheInformativeEntryAndSeparatesTheClasses) {
    RandomStream rng(9);
    for (std::size_t informative : {0u, 2u, 4u}) {
        auto r = fit_probe(separable_dataset(informative, 5, rng), ProbeConfig{200, 0.05, 1});
        const auto arg = std::max_element(r.weights.begin(), r.weights.end()) - r.weights.begin();
        EXPECT_EQ(static_cast<std::size_t>(arg), informative);
        EXPECT_EQ(r.accuracy, 1.0);
        EXPECT_LT(r.loss_history.back(), r.loss_history.front());
        EXPECT_NEAR(std::accumulate(r.weights.begin(), r.weights.end(), 0.0), 1.0, 1e-12);
    }
}

TEST(FitProbe, RejectsRepresentationsStillAttachedToAGraph) {
    RandomStream rng(10);
    auto d = separable_dataset(0, 3, rng);
    d.batches[1][2].values = TD(d.batches[1][2].values.shape(), d.batches[1][2].values.values(), true);
    EXPECT_THROW(fit_probe(d, ProbeConfig{}), EncoderLeakError);
}

TEST(FitProbe, RejectsBadConfig) {
    RandomStream rng(11);
    auto d = separable_dataset(0, 3, rng);
    EXPECT_THROW(fit_probe(d, ProbeConfig{0, 0.05, 0}), std::invalid_argument);
    EXPECT_THROW(fit_probe(d, ProbeConfig{10, 0.0, 0}), std::invalid_argument);
    EXPECT_THROW(ProbeParams<double>(0, 4, 2, rng), std::invalid_argument);
    EXPECT_THROW(ProbeParams<double>(3, 4, 1, rng), std::invalid_argument);
}

ssl::SslModel<double> tiny_ssl(MixerKind kind, std::uint64_t seed) {
    ModelConfig c = toy_config(kind);
    c.cnn.channels = 16;
    c.encoder.input_dim = 16;
    c.encoder.d_model = 16;
    c.encoder.mlp_hidden = 32;
    c.encoder.n_heads = 2;
    c.encoder.conv_kernel = 5;
    c.heads.entries = 8;
    c.heads.codeword_dim = 16;
    c.heads.final_dim = 16;
    RandomStream rng(seed);
    return ssl::SslModel<double>(c, rng);
}

TEST(TrainProbe, EncoderIsBitIdenticalAfterTraining) {
    for (auto kind : {MixerKind::summary_mixing, MixerKind::mhsa}) {
        auto model = tiny_ssl(kind, 3);
        auto corpus = ssl::FeatureCorpus<double>::synthetic(6, 0.5, 2);
        const auto before = snapshot(model);
        auto r = probe_planted_layer0(model, corpus, 2, 4, 0.5, ProbeConfig{30, 0.05, 4});
        EXPECT_EQ(snapshot(model), before);
        EXPECT_NEAR(std::accumulate(r.weights.begin(), r.weights.end(), 0.0), 1.0, 1e-12);
        EXPECT_EQ(r.weights.size(), model.cfg.encoder.n_layers + 1);
    }
}

TEST(TrainProbe, EncoderThatUpdatesDuringTrainingIsCaught) {
    auto model = tiny_ssl(MixerKind::summary_mixing, 3);
    auto corpus = ssl::FeatureCorpus<double>::synthetic(4, 0.5, 2);
    RandomStream rng(1);
    auto task = planted_layer0_task(model, corpus, 1, 4, 0.5, rng);
    auto leaky = [&](const SequenceBatch<double>& x) {
        model.encoder.input_proj.b.mutable_data()[0] += 1e-3;
        return encoder_forward(x, model.cfg.encoder, model.encoder);
    };
    EXPECT_THROW(train_probe<double>(model, task.inputs, task.labels, 2, leaky, ProbeConfig{5, 0.05, 0}), EncoderLeakError);
}

TEST(TrainProbe, LabelsOutsideTheHeadAreRejected) {
    auto model = tiny_ssl(MixerKind::summary_mixing, 3);
    auto corpus = ssl::FeatureCorpus<double>::synthetic(4, 0.5, 2);
    RandomStream rng(1);
    auto task = planted_layer0_task(model, corpus, 1, 4, 0.5, rng);
    task.labels[0][0] = 2;
    auto enc = [&](const SequenceBatch<double>& x) { return encoder_forward(x, model.cfg.encoder, model.encoder); };
    EXPECT_THROW(train_probe<double>(model, task.inputs, task.labels, 2, enc, ProbeConfig{5, 0.05, 0}), std::invalid_argument);
}

// ---- planted task ---------------------------------------------------------------------

TEST(PlantedTask, ShiftDirectionMapsToTheConstantVector) {
    RandomStream rng(12);
    auto w = randn({16, 8}, rng, 0.3);
    const auto u = constant_shift_direction(w);
    for (std::size_t j = 0; j < 8; ++j) {
        double s = 0;
        for (std::size_t i = 0; i < 16; ++i) s += u[i] * w.values()[i * 8 + j];
        EXPECT_NEAR(s, 1.0, 1e-10);
    }
}

TEST(PlantedTask, OnlyEntryZeroSeesTheLabel) {
    for (auto kind : {MixerKind::summary_mixing, MixerKind::mhsa}) {
        auto model = tiny_ssl(kind, 5);
        auto corpus = ssl::FeatureCorpus<double>::synthetic(3, 0.5, 2);
        // The same utterances shifted up and down: every layer after entry 0
        // must come out unchanged.
        auto base = ssl::extract_latents(model, corpus.batch({0, 1, 2}));
        const auto u = constant_shift_direction(model.encoder.input_proj.w);
        auto shifted = [&](double a) {
            auto v = base.values.values();
            for (std::size_t r = 0; r < v.size() / u.size(); ++r)
                for (std::size_t j = 0; j < u.size(); ++j) v[r * u.size() + j] += a * u[j];
            return base.with_values(TD(base.values.shape(), v));
        };
        NoGradGuard ng;
        auto up = encoder_forward(shifted(0.7), model.cfg.encoder, model.encoder);
        auto down = encoder_forward(shifted(-0.7), model.cfg.encoder, model.encoder);
        EXPECT_GT(testing_util::max_diff_valid(up[0], down[0]), 1.0);
        for (std::size_t l = 1; l < up.size(); ++l) EXPECT_LT(testing_util::max_diff_valid(up[l], down[l]), 1e-9) << "layer " << l;
    }
}

TEST(PlantedTask, ProbeWeightsPeakAtEntryZero) {
    auto model = tiny_ssl(MixerKind::summary_mixing, 8);
    auto corpus = ssl::FeatureCorpus<double>::synthetic(8, 0.5, 3);
    auto r = probe_planted_layer0(model, corpus, 2, 8, 0.5, ProbeConfig{150, 0.05, 2});
    EXPECT_EQ(std::max_element(r.weights.begin(), r.weights.end()) - r.weights.begin(), 0);
    EXPECT_GE(r.accuracy, 0.9);
}

TEST(UnitTask, LabelsMatchTheRenderedUnit) {
    RandomStream rng(1);
    auto task = unit_identity_task<double>(3, 2, 4, 0.3, frontend::FbankConfig{}, rng);
    EXPECT_EQ(task.classes, 3u);
    ASSERT_EQ(task.inputs.size(), 2u);
    for (const auto& l : task.labels)
        for (auto y : l) EXPECT_LT(y, 3u);
    EXPECT_THROW(unit_identity_task<double>(1, 1, 1, 0.3, frontend::FbankConfig{}, rng), std::invalid_argument);
    EXPECT_THROW(unit_identity_task<double>(99, 1, 1, 0.3, frontend::FbankConfig{}, rng), std::invalid_argument);
}

TEST(UnitTask, RepeatedUnitIsDeterministicPerSeed) {
    frontend::SyntheticSpeech gen;
    RandomStream a(4), b(4);
    EXPECT_EQ(gen.generate_unit(2, 0.4, a).samples, gen.generate_unit(2, 0.4, b).samples);
    EXPECT_THROW(gen.generate_unit(gen.inventory(), 0.4, a), std::out_of_range);
}

// ---- artefacts --------------------------------------------------------------------------

TEST(Heatmap, UniformColumn) {
    const auto csv = weight_heatmap_csv({{"uniform", std::vector<double>(4, 0.25)}});
    EXPECT_EQ(csv, "layer,uniform\n0,0.25\n1,0.25\n2,0.25\n3,0.25\n");
}

TEST(Heatmap, ColumnsKeepTaskOrderAndEachSumsToOne) {
    RandomStream rng(13);
    const auto a = layer_weights(randn({3}, rng)), b = layer_weights(randn({3}, rng));
    const auto csv = weight_heatmap_csv({{"zeta", a}, {"alpha", b}});
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "layer,zeta,alpha");
    double sa = 0, sb = 0;
    for (int l = 0; l < 3; ++l) {
        std::getline(in, line);
        int layer;
        double x, y;
        ASSERT_EQ(std::sscanf(line.c_str(), "%d,%lf,%lf", &layer, &x, &y), 3);
        EXPECT_EQ(layer, l);
        sa += x;
        sb += y;
    }
    EXPECT_NEAR(sa, 1.0, 1e-6);
    EXPECT_NEAR(sb, 1.0, 1e-6);
}

TEST(Heatmap, RaggedOrEmptyInputIsRejected) {
    EXPECT_THROW(weight_heatmap_csv({}), std::invalid_argument);
    EXPECT_THROW(weight_heatmap_csv({{"a", {0.5, 0.5}}, {"b", {1.0}}}), std::invalid_argument);
}

TEST(ProbeCheckpoint, RoundTripsThroughTheEncoderContainer) {
    RandomStream rng(14);
    ProbeParams<float> p(3, 4, 5, rng);
    p.logits.mutable_data()[1] = 0.75f;
    const auto path = (std::filesystem::temp_directory_path() / "summix_probe_ckpt.bin").string();
    checkpoint::write(path, checkpoint::capture(p, {{"kind", "probe"}}));
    ProbeParams<float> q(3, 4, 5, rng);
    checkpoint::restore(q, checkpoint::read(path));
    EXPECT_EQ(snapshot(q), snapshot(p));
    std::filesystem::remove(path);
}

} // namespace
} // namespace summix::probe
