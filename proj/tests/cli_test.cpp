#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "summix/cli/run_command.hpp"

namespace summix::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "summix");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_command(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("summix_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string write(const std::string& name, const std::string& text) {
        const auto p = dir_ / name;
        std::ofstream(p) << text;
        return p.string();
    }
    std::string sub(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

const std::vector<std::string> kTinyPretrain{"--set", "schedule.steps=3",   "--set", "schedule.warmup=2", "--set", "data.seconds=0.6",
                                             "--set", "data.corpus_size=3", "--set", "data.utterances=2", "--set", "model.d_model=16",
                                             "--set", "model.mlp_hidden=16", "--set", "model.cnn_channels=16", "--set", "model.n_heads=2",
                                             "--set", "model.conv_kernel=5"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

// ---- segment ----------------------------------------------------------------------------

TEST_F(Cli, SegmentReproducesTheTenTenThirtyFiveExample) {
    const auto m = write("m.tsv", "rec\t10,10,35\n");
    auto r = run({"segment", "--manifest", m, "--out", sub("seg")});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "rec\t20,35\n");
    EXPECT_EQ(slurp(dir_ / "seg" / "segments.tsv"), "rec\t20,35\n");
    EXPECT_TRUE(fs::exists(dir_ / "seg" / "segment_summary.json"));
    EXPECT_TRUE(fs::exists(dir_ / "seg" / "config.ini"));
}

TEST_F(Cli, SegmentInputErrorsExitWithOne) {
    EXPECT_EQ(run({"segment"}).code, 1);
    EXPECT_EQ(run({"segment", "--manifest", sub("missing.tsv")}).code, 1);
    EXPECT_EQ(run({"segment", "--manifest", write("neg.tsv", "r\t10,-1\n")}).code, 1);
    EXPECT_EQ(run({"segment", "--manifest", write("bad.tsv", "no tab here\n")}).code, 1);
}

// ---- argument handling -------------------------------------------------------------------

TEST_F(Cli, UnknownCommandPrintsUsageAndExitsOne) {
    auto r = run({"frobnicate"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
    EXPECT_EQ(run({}).code, 1);
}

TEST_F(Cli, BadConfigSeedOrOverrideExitsOne) {
    EXPECT_EQ(run({"params", "--config", "paper_transformer"}).code, 1);
    EXPECT_EQ(run({"params", "--set", "model.no_such_key=1"}).code, 1);
    EXPECT_EQ(run({"params", "--set", "model.d_model=wide"}).code, 1);
    EXPECT_EQ(run({"params", "--set", "segment.max_len_s=10"}).code, 1);  // not a key params reads
    EXPECT_EQ(run({"gradcheck", "--seed", "-4"}).code, 1);
    EXPECT_EQ(run({"gradcheck", "--seed", "12x"}).code, 1);
    EXPECT_EQ(run({"pretrain"}).code, 1);  // --out required
}

TEST_F(Cli, HelpOfEachCommandListsEveryKeyItReads) {
    RunConfig c;
    ConfigRegistry all;
    register_all_keys(all, c);
    for (const auto& [name, desc] : commands()) {
        auto r = run({name, "--help"});
        EXPECT_EQ(r.code, 0) << name;
        const auto keys = command_registry(all, name).keys();
        EXPECT_FALSE(keys.empty()) << name;
        for (const auto& k : keys) EXPECT_NE(r.out.find(k.name), std::string::npos) << name << " help misses " << k.name;
    }
}

// ---- params -----------------------------------------------------------------------------

TEST_F(Cli, ParamsPrintsBlocksAndTotals) {
    auto mh = run({"params", "--config", "paper_mhsa"});
    auto sm = run({"params", "--config", "paper_summarymixing", "--out", sub("p")});
    EXPECT_EQ(mh.code, 0);
    EXPECT_EQ(sm.code, 0);
    EXPECT_NE(mh.out.find("165332352"), std::string::npos);
    EXPECT_NE(sm.out.find("161811840"), std::string::npos);
    EXPECT_NE(sm.out.find("layer.mixer"), std::string::npos);
    const auto j = nlohmann::json::parse(slurp(dir_ / "p" / "params.json"));
    EXPECT_EQ(j["total"].get<std::size_t>(), 161811840u);
}

// ---- pretrain, echo and determinism ---------------------------------------------------------

TEST_F(Cli, PretrainIsByteIdenticalForTheSameConfigAndSeed) {
    auto a = run(with({"pretrain", "--seed", "4", "--out", sub("a")}, kTinyPretrain));
    auto b = run(with({"pretrain", "--seed", "4", "--out", sub("b")}, kTinyPretrain));
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    for (auto f : {"config.ini", "metrics.csv", "model.ckpt", "summary.json"}) {
        EXPECT_FALSE(slurp(dir_ / "a" / f).empty()) << f;
        EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
    }
    auto c = run(with({"pretrain", "--seed", "5", "--out", sub("c")}, kTinyPretrain));
    EXPECT_NE(slurp(dir_ / "a" / "model.ckpt"), slurp(dir_ / "c" / "model.ckpt"));
}

TEST_F(Cli, EchoedConfigReproducesTheRun) {
    ASSERT_EQ(run(with({"pretrain", "--seed", "4", "--out", sub("a")}, kTinyPretrain)).code, 0);
    const auto echo = slurp(dir_ / "a" / "config.ini");
    EXPECT_NE(echo.find("seed = 4"), std::string::npos);
    EXPECT_NE(echo.find("d_model = 16"), std::string::npos);
    auto r = run({"pretrain", "--config", (dir_ / "a" / "config.ini").string(), "--out", sub("b")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(dir_ / "b" / "config.ini"), echo);
    EXPECT_EQ(slurp(dir_ / "b" / "model.ckpt"), slurp(dir_ / "a" / "model.ckpt"));
}

TEST_F(Cli, NonFiniteLossExitsTwoWithHistoryDump) {
    auto r = run(with({"pretrain", "--out", sub("nf"), "--set", "objective.diversity_weight=inf"}, kTinyPretrain));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("non-finite"), std::string::npos) << r.err;
    EXPECT_TRUE(fs::exists(dir_ / "nf" / "nonfinite_history.csv"));
}

// ---- probe ------------------------------------------------------------------------------------

TEST_F(Cli, ProbeOnAPretrainedCheckpoint) {
    ASSERT_EQ(run(with({"pretrain", "--out", sub("pt")}, kTinyPretrain)).code, 0);
    const auto before = slurp(dir_ / "pt" / "model.ckpt");
    auto r = run({"probe", "--out", sub("pr"), "--set", "probe.checkpoint=" + sub("pt/model.ckpt"), "--set", "probe.tasks=planted,unit",
                  "--set", "probe.steps=40", "--set", "probe.seconds=0.5", "--set", "probe.batch_size=4", "--set", "probe.batches=2"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = slurp(dir_ / "pr" / "layer_weights.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "layer,planted,unit");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);  // header + L + 1 = 3 rows
    EXPECT_TRUE(fs::exists(dir_ / "pr" / "probe_planted.ckpt"));
    EXPECT_EQ(slurp(dir_ / "pt" / "model.ckpt"), before);
    EXPECT_EQ(run({"probe", "--out", sub("x"), "--set", "probe.tasks=speaker"}).code, 1);
    EXPECT_EQ(run({"probe", "--out", sub("y"), "--set", "probe.checkpoint=" + write("junk.ckpt", "not a checkpoint")}).code, 1);
}

// ---- bench, features, gradcheck -----------------------------------------------------------------

TEST_F(Cli, BenchWritesCsvAndSummaryForBothMixers) {
    auto r = run({"bench", "--mixers", "both", "--lengths", "64,128,256,512", "--set", "bench.d_model=32", "--out", sub("b")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = slurp(dir_ / "b" / "bench.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "mixer,T,d_model,median_seconds,activation_elements");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
    const auto j = nlohmann::json::parse(slurp(dir_ / "b" / "bench_summary.json"));
    EXPECT_TRUE(j["slopes"].contains("mhsa"));
    EXPECT_TRUE(j["slopes"].contains("summary_mixing"));
    EXPECT_EQ(run({"bench", "--lengths", "64,32,128,256", "--out", sub("c")}).code, 1);
    EXPECT_EQ(run({"bench", "--mixers", "lstm", "--out", sub("d")}).code, 1);
}

TEST_F(Cli, FeaturesFromWavAndSynthesis) {
    auto r = run({"features", "--out", sub("f"), "--set", "features.seconds=1", "--set", "features.cnn=true"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto fb = slurp(dir_ / "f" / "fbank.csv");
    EXPECT_EQ(std::count(fb.begin(), fb.end(), '\n'), 98);  // 1 s -> 98 frames
    const auto lat = slurp(dir_ / "f" / "latents.csv");
    EXPECT_EQ(std::count(lat.begin(), lat.end(), '\n'), 49);

    frontend::Waveform w = frontend::sine_wave(440.0, 0.5, 8000);
    frontend::write_wav(sub("low.wav"), w);
    EXPECT_EQ(run({"features", "--out", sub("g"), "--set", "features.wav=" + sub("low.wav")}).code, 1);
    frontend::write_wav(sub("ok.wav"), frontend::sine_wave(440.0, 0.5));
    EXPECT_EQ(run({"features", "--out", sub("h"), "--set", "features.wav=" + sub("ok.wav")}).code, 0);
}

TEST_F(Cli, GradcheckPassesAndReportsEveryBlock) {
    auto r = run({"gradcheck", "--out", sub("g")});
    EXPECT_EQ(r.code, 0) << r.out;
    const auto j = nlohmann::json::parse(slurp(dir_ / "g" / "gradcheck.json"));
    EXPECT_EQ(j.size(), 8u);
}

} // namespace
} // namespace summix::cli
