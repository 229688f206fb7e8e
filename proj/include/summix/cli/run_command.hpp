// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_CLI_RUN_COMMAND_HPP
#define SUMMIX_CLI_RUN_COMMAND_HPP

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "summix/bench/bench.hpp"
#include "summix/cli/gradient_suite.hpp"
#include "summix/conformer/checkpoint.hpp"
#include "summix/conformer/count.hpp"
#include "summix/frontend/segment.hpp"
#include "summix/probe/tasks.hpp"
#include "summix/ssl/config.hpp"
#include "summix/ssl/trainer.hpp"

namespace summix::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kInternalError = 2 };

struct SegmentOptions {
    std::string manifest;
    double max_len_s = 30.0;
    double discard_over_s = 60.0;
};

struct FeaturesOptions {
    std::string wav;       // empty: synthesize `seconds` of test speech
    double seconds = 2.0;
    bool cnn = false;      // also write the CNN latents of a seeded frontend
};

struct ProbeOptions {
    std::string checkpoint;  // empty: a freshly initialized encoder
    std::string tasks = "planted";
    std::size_t batches = 4;
    std::size_t batch_size = 8;
    std::size_t corpus_size = 32;
    double seconds = 1.0;
    double strength = 0.5;
    std::size_t unit_classes = 4;
    std::size_t steps = 300;
    double lr = 0.05;
};

struct BenchOptions {
    std::string mixers = "both";
    std::vector<std::size_t> lengths{512, 1024, 2048, 4096, 8192};
    std::size_t d_model = 256;
    std::size_t n_heads = 8;
    std::size_t repeats = 5;
    bool backward = false;
};

struct RunConfig {
    std::size_t seed = 0;
    ssl::PretrainConfig pretrain = ssl::toy_pretrain_config(MixerKind::summary_mixing);
    SegmentOptions segment;
    FeaturesOptions features;
    ProbeOptions probe;
    BenchOptions bench;
};

inline const std::map<std::string, std::pair<bool, MixerKind>>& named_configs() {
    static const std::map<std::string, std::pair<bool, MixerKind>> m{
        {"paper_mhsa", {true, MixerKind::mhsa}},
        {"paper_summarymixing", {true, MixerKind::summary_mixing}},
        {"toy_mhsa", {false, MixerKind::mhsa}},
        {"toy_summarymixing", {false, MixerKind::summary_mixing}},
    };
    return m;
}

inline void register_all_keys(ConfigRegistry& r, RunConfig& c) {
    r.bind("run.seed", c.seed, "global seed for initialization and sampling");
    ssl::register_pretrain_keys(r, c.pretrain);
    auto& s = c.segment;
    r.bind("segment.manifest", s.manifest, "TSV manifest: recording_id<TAB>clip durations in seconds");
    r.bind("segment.max_len_s", s.max_len_s, "maximum length of a concatenated sequence");
    r.bind("segment.discard_over_s", s.discard_over_s, "clips longer than this are dropped");
    auto& f = c.features;
    r.bind("features.wav", f.wav, "mono WAV input; empty synthesizes test speech");
    r.bind("features.seconds", f.seconds, "length of the synthesized input");
    r.bind("features.cnn", f.cnn, "also write latents of a seeded CNN frontend");
    auto& p = c.probe;
    r.bind("probe.checkpoint", p.checkpoint, "encoder checkpoint; empty uses a seeded fresh encoder");
    r.bind("probe.tasks", p.tasks, "comma-separated tasks: planted, unit");
    r.bind("probe.batches", p.batches, "labelled batches per task");
    r.bind("probe.batch_size", p.batch_size, "utterances per labelled batch");
    r.bind("probe.corpus_size", p.corpus_size, "synthetic utterances behind the planted task");
    r.bind("probe.seconds", p.seconds, "utterance length for probe tasks");
    r.bind("probe.strength", p.strength, "size of the planted entry-0 shift");
    r.bind("probe.unit_classes", p.unit_classes, "label count of the unit-identity task");
    r.bind("probe.steps", p.steps, "probe optimizer steps");
    r.bind("probe.lr", p.lr, "probe learning rate");
    auto& b = c.bench;
    r.bind("bench.mixers", b.mixers, "summary_mixing, mhsa or both");
    r.bind("bench.lengths", b.lengths, "strictly increasing sequence lengths, at least four");
    r.bind("bench.d_model", b.d_model, "mixer width");
    r.bind("bench.n_heads", b.n_heads, "attention heads (and SummaryMixing heads)");
    r.bind("bench.repeats", b.repeats, "timed repeats per length (>= 5)");
    r.bind("bench.backward", b.backward, "time forward plus backward");
}

// Key prefixes (or full key names) each command reads.
inline std::vector<std::string> command_keys(const std::string& cmd) {
    if (cmd == "segment") return {"run.", "segment."};
    if (cmd == "features") return {"run.", "model.n_mels", "model.cnn_", "features."};
    if (cmd == "pretrain") return {"run.", "model.", "objective.", "schedule.", "data."};
    if (cmd == "probe") return {"run.", "model.", "probe."};
    if (cmd == "bench") return {"run.", "bench."};
    if (cmd == "params") return {"model."};
    if (cmd == "gradcheck") return {"run."};
    throw ConfigError("unknown command '" + cmd + "'");
}

inline ConfigRegistry command_registry(const ConfigRegistry& all, const std::string& cmd) {
    ConfigRegistry r;
    const auto prefixes = command_keys(cmd);
    for (const auto& k : all.keys())
        for (const auto& p : prefixes)
            if (k.name.rfind(p, 0) == 0) {
                r.add(k);
                break;
            }
    return r;
}

struct Invocation {
    std::string command;
    std::string config = "toy_summarymixing";
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> sets;
    // Command-specific shorthands for --set.
    std::string manifest, mixers, lengths;
};

// Named base, then the INI file (any known key), then --set (keys of this
// command only), then the shorthand flags and --seed. `echo` keeps
// references into `c`.
inline void resolve(const Invocation& inv, RunConfig& c, ConfigRegistry& echo) {
    c = RunConfig{};
    if (auto it = named_configs().find(inv.config); it != named_configs().end()) {
        c.pretrain = it->second.first ? ssl::paper_pretrain_config(it->second.second) : ssl::toy_pretrain_config(it->second.second);
    } else if (!inv.config.empty()) {
        if (!std::filesystem::exists(inv.config)) {
            throw ConfigError("--config: '" + inv.config + "' is neither a named config (paper_mhsa, paper_summarymixing, "
                              "toy_mhsa, toy_summarymixing) nor a readable file");
        }
        ConfigRegistry all;
        register_all_keys(all, c);
        all.apply_ini_file(inv.config);
    }
    ConfigRegistry all;
    register_all_keys(all, c);
    echo = command_registry(all, inv.command);
    for (const auto& s : inv.sets) echo.apply_override(s);
    if (!inv.manifest.empty()) echo.set("segment.manifest", inv.manifest);
    if (!inv.mixers.empty()) echo.set("bench.mixers", inv.mixers);
    if (!inv.lengths.empty()) echo.set("bench.lengths", inv.lengths);
    if (inv.seed) c.seed = static_cast<std::size_t>(*inv.seed);
    ssl::sync_derived(c.pretrain);
}

inline std::filesystem::path require_out(const Invocation& inv) {
    if (inv.out.empty()) throw ConfigError(inv.command + ": --out DIR is required");
    return inv.out;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream o(p, std::ios::binary);
    if (!o || !(o << text)) throw std::runtime_error("cannot write " + p.string());
}

inline std::string matrix_csv(const Tensor<float>& x) {
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    std::string s;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) s += fmt::format("{}{:.9g}", j ? "," : "", x.values()[i * cols + j]);
        s += '\n';
    }
    return s;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') out.push_back(line);
    return out;
}

// ---- commands ---------------------------------------------------------------------------

inline int cmd_segment(const RunConfig& c, const Invocation& inv, std::ostream& out) {
    const auto& s = c.segment;
    if (s.manifest.empty()) throw ConfigError("segment: --manifest (segment.manifest) is required");
    std::ifstream in(s.manifest);
    if (!in) throw ConfigError("segment: cannot open manifest " + s.manifest);
    const auto manifests = frontend::parse_manifest(in);
    std::ostringstream tsv;
    frontend::SegmentationSummary summary;
    for (const auto& m : manifests) {
        const auto packed = frontend::segment_clips(m, s.max_len_s, s.discard_over_s);
        frontend::write_segments(tsv, m.recording_id, packed);
        frontend::tally(summary, m, packed, s.discard_over_s);
    }
    out << tsv.str();
    if (!inv.out.empty()) {
        write_file(std::filesystem::path(inv.out) / "segments.tsv", tsv.str());
        write_file(std::filesystem::path(inv.out) / "segment_summary.json", summary.to_json().dump(2) + "\n");
    }
    return kOk;
}

inline int cmd_features(const RunConfig& c, const Invocation& inv, std::ostream& out) {
    const auto dir = require_out(inv);
    const auto& f = c.features;
    const auto& mc = c.pretrain.model;
    frontend::Waveform w;
    RandomStream rng(c.seed);
    if (!f.wav.empty()) {
        w = frontend::read_wav(f.wav);
        if (w.sample_rate != mc.fbank.sample_rate_hz)
            throw ConfigError(fmt::format("features: {} is {} Hz, expected {} Hz", f.wav, w.sample_rate, mc.fbank.sample_rate_hz));
    } else {
        frontend::SyntheticSpeechConfig sc;
        sc.sample_rate = static_cast<std::uint32_t>(mc.fbank.sample_rate_hz);
        w = frontend::SyntheticSpeech(sc).generate(f.seconds, rng);
    }
    const auto fb = frontend::fbank<float>(w.samples, mc.fbank);
    write_file(dir / "fbank.csv", matrix_csv(fb));
    out << fmt::format("fbank: {} frames x {} mels\n", fb.dim(0), fb.dim(1));
    if (f.cnn) {
        frontend::Cnn1dParams<float> p(mc.cnn, rng);
        NoGradGuard ng;
        const auto lat = frontend::cnn1d_downsample(SequenceBatch<float>::dense(ops::reshape(fb, {1, fb.dim(0), fb.dim(1)})), mc.cnn, p);
        write_file(dir / "latents.csv", matrix_csv(ops::reshape(lat.values, {lat.frames(), lat.width()})));
        out << fmt::format("latents: {} frames x {} channels\n", lat.frames(), lat.width());
    }
    return kOk;
}

inline int cmd_pretrain(const RunConfig& c, const Invocation& inv, std::ostream& out) {
    const auto dir = require_out(inv);
    const auto& pc = c.pretrain;
    pc.validate();
    std::vector<std::string> wavs;
    if (!pc.data.wav_list.empty()) wavs = read_lines(pc.data.wav_list);
    auto corpus = ssl::make_corpus<float>(pc, wavs);
    ssl::Pretrainer<float> trainer(pc, c.seed);
    RandomStream data_rng(c.seed ^ 0xDA7A5EEDULL);
    const std::size_t every = std::max<std::size_t>(1, pc.schedule.steps / 20);
    try {
        ssl::pretrain(trainer, corpus, pc.schedule.steps, data_rng, [&](const ssl::StepMetrics& m) {
            if (m.step == 1 || m.step % every == 0 || m.step == pc.schedule.steps) {
                out << fmt::format("step {:>6}  lr {:.3e}  contrastive {:.4f}  diversity {:.4f}  perplexity {:.2f}\n", m.step, m.lr,
                                   m.contrastive, m.diversity, m.perplexity);
            }
        });
    } catch (const ssl::NonFiniteLossError& e) {
        write_file(dir / "nonfinite_history.csv", e.dump());
        throw;
    }
    trainer.write_metrics_csv((dir / "metrics.csv").string());
    auto& model = trainer.model();
    checkpoint::write((dir / "model.ckpt").string(), checkpoint::capture(model, to_json(model.cfg)));
    const auto& h = trainer.history();
    nlohmann::json s{{"steps", h.size()},
                     {"contrastive_first", h.front().contrastive},
                     {"contrastive_last", h.back().contrastive},
                     {"perplexity_first", h.front().perplexity},
                     {"perplexity_last", h.back().perplexity}};
    write_file(dir / "summary.json", s.dump(2) + "\n");
    return kOk;
}

inline ssl::SslModel<float> load_or_init(const RunConfig& c) {
    if (c.probe.checkpoint.empty()) {
        RandomStream rng(c.seed);
        return ssl::SslModel<float>(c.pretrain.model, rng);
    }
    const auto contents = checkpoint::read(c.probe.checkpoint);
    const auto cfg = model_config_from_json(contents.config);
    RandomStream rng(0);
    ssl::SslModel<float> m(cfg, rng);
    checkpoint::restore(m, contents);
    return m;
}

inline int cmd_probe(const RunConfig& c, const Invocation& inv, std::ostream& out) {
    const auto dir = require_out(inv);
    const auto& po = c.probe;
    auto model = load_or_init(c);
    const auto tasks = split_list(po.tasks);
    if (tasks.empty()) throw ConfigError("probe: no tasks given");
    probe::ProbeConfig pc{po.steps, po.lr, c.seed};
    std::vector<std::pair<std::string, std::vector<double>>> columns;
    nlohmann::json report;
    for (const auto& task : tasks) {
        probe::ProbeResult<float> r;
        if (task == "planted") {
            auto corpus = ssl::FeatureCorpus<float>::synthetic(po.corpus_size, po.seconds, c.seed + 1, model.cfg.fbank);
            r = probe::probe_planted_layer0(model, corpus, po.batches, po.batch_size, po.strength, pc);
        } else if (task == "unit") {
            RandomStream rng(c.seed + 2);
            auto t = probe::unit_identity_task<float>(po.unit_classes, po.batches, po.batch_size, po.seconds, model.cfg.fbank, rng);
            r = probe::train_probe<float>(model, t.inputs, t.labels, t.classes, [&](const SequenceBatch<float>& x) {
                return encoder_forward(ssl::extract_latents(model, x), model.cfg.encoder, model.encoder);
            }, pc);
        } else {
            throw ConfigError("probe: unknown task '" + task + "' (expected planted or unit)");
        }
        const auto arg = static_cast<std::size_t>(std::max_element(r.weights.begin(), r.weights.end()) - r.weights.begin());
        out << fmt::format("{}: accuracy {:.3f}, heaviest entry {}, weights [{:.4f}]\n", task, r.accuracy, arg,
                           fmt::join(r.weights, ", "));
        report[task] = {{"weights", r.weights}, {"accuracy", r.accuracy}, {"argmax", arg}, {"final_loss", r.loss_history.back()}};
        checkpoint::write((dir / ("probe_" + task + ".ckpt")).string(),
                          checkpoint::capture(r.params, {{"task", task}, {"entries", r.params.entries()}, {"classes", r.params.classes()}}));
        columns.emplace_back(task, r.weights);
    }
    probe::emit_weight_heatmap((dir / "layer_weights.csv").string(), columns);
    write_file(dir / "probe.json", report.dump(2) + "\n");
    return kOk;
}

inline int cmd_bench(const RunConfig& c, const Invocation& inv, std::ostream& out) {
    const auto dir = require_out(inv);
    const auto& b = c.bench;
    std::vector<MixerKind> kinds;
    if (b.mixers == "both") kinds = {MixerKind::summary_mixing, MixerKind::mhsa};
    else kinds = {parse_mixer_kind(b.mixers)};
    bench::TimingOptions opt;
    opt.repeats = b.repeats;
    opt.n_heads = b.n_heads;
    opt.seed = c.seed;
    opt.backward = b.backward;
    std::vector<bench::BenchRecord> records;
    for (auto k : kinds) {
        auto r = bench::time_scaling(k, b.lengths, b.d_model, opt);
        for (const auto& x : r) out << fmt::format("{:<15} T={:<6} median {:.6f} s\n", to_string(k), x.frames, x.median_seconds);
        records.insert(records.end(), r.begin(), r.end());
    }
    const auto summary = bench::summarize(records, b.n_heads);
    for (const auto& [k, s] : summary.slopes) out << fmt::format("slope {:<15} {:.3f}\n", to_string(k), s);
    bench::write_text((dir / "bench.csv").string(), bench::records_csv(records));
    bench::write_text((dir / "bench_summary.json").string(), summary.to_json().dump(2) + "\n");
    return kOk;
}

inline int cmd_params(const RunConfig& c, const Invocation& inv, std::ostream& out) {
    const auto report = count_params(c.pretrain.model);
    out << report.to_text();
    if (!inv.out.empty()) write_file(std::filesystem::path(inv.out) / "params.json", report.to_json().dump(2) + "\n");
    return kOk;
}

inline int cmd_gradcheck(const RunConfig& c, const Invocation& inv, std::ostream& out) {
    const auto entries = gradient_suite::run(c.seed);
    for (const auto& e : entries) {
        out << fmt::format("{:<30} max rel error {:.3e}  ({} elements)  {}\n", e.name, e.report.max_relative_error, e.elements,
                           e.report.max_relative_error < gradient_suite::kTolerance ? "ok" : "FAIL");
    }
    if (!inv.out.empty()) write_file(std::filesystem::path(inv.out) / "gradcheck.json", gradient_suite::to_json(entries).dump(2) + "\n");
    return gradient_suite::all_pass(entries) ? kOk : kInternalError;
}

inline const std::vector<std::pair<std::string, std::string>>& commands() {
    static const std::vector<std::pair<std::string, std::string>> c{
        {"segment", "pack adjacent clips of a manifest into training sequences"},
        {"features", "filterbank (and optional CNN latent) features of one waveform"},
        {"pretrain", "self-supervised pre-training of the encoder"},
        {"probe", "frozen-encoder layer-weight probe"},
        {"bench", "time and activation-memory scaling of the mixers"},
        {"params", "per-block parameter counts"},
        {"gradcheck", "finite-difference check of every differentiable block"},
    };
    return c;
}

// Parses argv and runs one command. Returns 0 on success, 1 on input or
// config errors, 2 on internal failures.
inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"summix: SummaryMixing and MHSA Conformer encoders with wav2vec 2.0 pre-training"};
    app.require_subcommand(1);
    app.name("summix");
    Invocation inv;
    RunConfig help_defaults;
    ConfigRegistry help_all;
    register_all_keys(help_all, help_defaults);
    std::string seed_text;
    for (const auto& [name, desc] : commands()) {
        auto* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", inv.config, "named config (paper_mhsa, paper_summarymixing, toy_mhsa, toy_summarymixing) or INI path");
        sub->add_option("--seed", seed_text, "global seed (unsigned 64-bit)");
        sub->add_option("--out", inv.out, "output directory");
        sub->add_option("--set", inv.sets, "override one key: --set section.key=value (repeatable)");
        if (name == "segment") sub->add_option("--manifest", inv.manifest, "shorthand for --set segment.manifest=PATH");
        if (name == "bench") {
            sub->add_option("--mixers", inv.mixers, "shorthand for --set bench.mixers=...");
            sub->add_option("--lengths", inv.lengths, "shorthand for --set bench.lengths=...");
        }
        sub->footer("Config keys read by this command:\n" + command_registry(help_all, name).help_text());
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        if (code == 0) return kOk;
        err << app.help();
        return kInputError;
    }
    for (auto* sub : app.get_subcommands()) inv.command = sub->get_name();
    try {
        if (!seed_text.empty()) {
            std::uint64_t v = 0;
            const auto* end = seed_text.data() + seed_text.size();
            const auto [p, ec] = std::from_chars(seed_text.data(), end, v);
            if (ec != std::errc() || p != end) throw ConfigError("--seed: '" + seed_text + "' is not an unsigned 64-bit integer");
            inv.seed = v;
        }
        RunConfig cfg;
        ConfigRegistry echo;
        resolve(inv, cfg, echo);
        if (!inv.out.empty()) {
            std::filesystem::create_directories(inv.out);
            write_file(std::filesystem::path(inv.out) / "config.ini", "# summix " + inv.command + "\n" + echo.to_ini());
        }
        if (inv.command == "segment") return cmd_segment(cfg, inv, out);
        if (inv.command == "features") return cmd_features(cfg, inv, out);
        if (inv.command == "pretrain") return cmd_pretrain(cfg, inv, out);
        if (inv.command == "probe") return cmd_probe(cfg, inv, out);
        if (inv.command == "bench") return cmd_bench(cfg, inv, out);
        if (inv.command == "params") return cmd_params(cfg, inv, out);
        if (inv.command == "gradcheck") return cmd_gradcheck(cfg, inv, out);
        err << app.help();
        return kInputError;
    } catch (const ssl::NonFiniteLossError& e) {
        err << "error: " << e.what() << '\n';
        return kInternalError;
    } catch (const probe::EncoderLeakError& e) {
        err << "error: " << e.what() << '\n';
        return kInternalError;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kInputError;
    } catch (const frontend::ManifestError& e) {
        err << "manifest error: " << e.what() << '\n';
        return kInputError;
    } catch (const frontend::WavError& e) {
        err << "wav error: " << e.what() << '\n';
        return kInputError;
    } catch (const checkpoint::CheckpointError& e) {
        err << "checkpoint error: " << e.what() << '\n';
        return kInputError;
    } catch (const nlohmann::json::exception& e) {
        err << "checkpoint config error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << '\n';
        return kInputError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternalError;
    }
}

} // namespace summix::cli

#endif
