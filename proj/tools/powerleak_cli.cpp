// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// powerleak: command-line front end for the channel simulators, the digit
// classifier and the experiment harness.
//
// Exit codes: 0 success, 1 validation error (bad flags, config or input),
// 2 runtime error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "powerleak/config_text.hpp"
#include "powerleak/harness.hpp"
#include "powerleak/random.hpp"
#include "powerleak/trace_io.hpp"
#include "powerleak/wav.hpp"

namespace fs = std::filesystem;
using namespace powerleak;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

// Flags shared by the experiment-style subcommands.
struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::vector<std::string> profiles;
    std::vector<double> volumes;
    std::string corpus;
    std::string model;
    std::string registry;
    std::optional<int> max_utterances;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--config", c.config, "experiment config file (key = value)");
    cmd->add_option("--seed", c.seed, "master seed");
    cmd->add_option("--out", c.out, "output directory")->capture_default_str();
    cmd->add_option("--profile", c.profiles, "device profile name (repeatable)");
    cmd->add_option("--volume", c.volumes, "playback volume in (0, 1] (repeatable)");
    cmd->add_option("--corpus", c.corpus, "WAV directory or synthetic-digits[:...] / synthetic-commands[:...]");
    cmd->add_option("--registry", c.registry, "device registry file");
    cmd->add_option("--max-utterances", c.max_utterances, "truncate the corpus");
}

ExperimentSpec build_spec(const Common& c, ExperimentKind kind, bool keep_config_kind = false)
{
    ExperimentSpec s = c.config.empty() ? ExperimentSpec{} : load_experiment(c.config);
    if (!keep_config_kind || c.config.empty())
        s.kind = kind;
    if (c.seed)
        s.seed = *c.seed;
    if (!c.out.empty())
        s.out = c.out;
    if (!c.profiles.empty())
        s.devices = c.profiles;
    if (!c.volumes.empty())
        s.volumes = c.volumes;
    if (!c.corpus.empty())
        s.corpus = c.corpus;
    if (!c.model.empty())
        s.model = c.model;
    if (!c.registry.empty())
        s.device_registry = c.registry;
    if (c.max_utterances)
        s.max_utterances = *c.max_utterances;
    s.validate();
    return s;
}

std::vector<Utterance> spec_corpus(const ExperimentSpec& s)
{
    std::vector<Utterance> corpus = resolve_corpus(s.corpus);
    if (s.max_utterances > 0 && static_cast<int>(corpus.size()) > s.max_utterances)
        corpus.resize(static_cast<size_t>(s.max_utterances));
    return corpus;
}

void finish(const Report& r, const std::string& out)
{
    for (const auto& p : emit_report(r, out))
        std::cout << p.string() << '\n';
}

void make_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        fail(Errc::unwritable_path, dir.string() + ": " + ec.message());
}

template <typename Unit>
Trace<Unit> read_trace(const fs::path& path)
{
    return path.extension() == ".csv" ? read_trace_csv<Unit>(path) : read_trace_raw<Unit>(path);
}

const DeviceProfile& single_device(const ExperimentSpec& s, std::vector<DeviceProfile>& store)
{
    store = resolve_devices(s);
    if (s.devices.empty())
        store.resize(1); // single-clip commands default to the first registered phone
    require(store.size() == 1, "single-clip mode takes exactly one --profile");
    return store.front();
}

void print_prediction(const std::string& name, const Prediction& p)
{
    std::cout << name << ": digit " << p.digit;
    for (int d = 0; d < 10; ++d)
        std::cout << ' ' << text::format_double(p.probabilities[static_cast<size_t>(d)]);
    std::cout << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Power-line side-channel toolkit: injection, eavesdropping and leaked-audio digit recognition"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolkitVersion));

    // inject ---------------------------------------------------------------
    Common inj;
    std::string inj_in;
    double inj_k = 0;
    bool liveness = false;
    auto* inject = app.add_subcommand("inject", "microphone-wire injection: one clip (--in) or a corpus evaluation");
    add_common(inject, inj);
    inject->add_option("--in", inj_in, "command WAV to inject");
    inject->add_option("--k", inj_k, "voltage-range factor");
    inject->add_flag("--liveness-16k", liveness, "also write the recordings downsampled to 16 kHz");

    // eavesdrop -------------------------------------------------------------
    Common eav;
    std::string eav_in;
    double eav_k = 0;
    auto* eavesdrop = app.add_subcommand("eavesdrop", "speaker-wire eavesdropping: one clip (--in) or a corpus evaluation");
    add_common(eavesdrop, eav);
    eavesdrop->add_option("--in", eav_in, "played WAV");
    eavesdrop->add_option("--k", eav_k, "speaker-wire voltage gain");

    // powerline -------------------------------------------------------------
    Common pl;
    std::string pl_in;
    bool pl_no_noise = false;
    auto* powerline = app.add_subcommand("powerline", "charging-current leak: one clip (--in) or a corpus evaluation");
    add_common(powerline, pl);
    powerline->add_option("--in", pl_in, "played WAV");
    powerline->add_option("--model", pl.model, "classifier checkpoint");
    powerline->add_flag("--no-noise", pl_no_noise, "disable the firmware noise model");

    // denoise ---------------------------------------------------------------
    std::string dn_trace, dn_idle, dn_out = "out";
    double dn_floor = kDefaultSpectralFloor, dn_hp = kDefaultHighPassHz;
    auto* denoise = app.add_subcommand("denoise", "recover and spectrally denoise a charging-current trace");
    denoise->add_option("--trace", dn_trace, "current trace (.csv or raw float32 with .json sidecar)")->required();
    denoise->add_option("--idle", dn_idle, "idle trace for the noise estimate")->required();
    denoise->add_option("--out", dn_out, "output directory")->capture_default_str();
    denoise->add_option("--floor", dn_floor, "spectral floor")->capture_default_str();
    denoise->add_option("--highpass", dn_hp, "high-pass cutoff, Hz")->capture_default_str();

    // train -----------------------------------------------------------------
    Common tr;
    TrainConfig tcfg;
    std::string optimizer = "adam", note;
    bool augment = false;
    int noiseless_every = 10;
    auto* train_cmd = app.add_subcommand("train", "train the digit CNN");
    add_common(train_cmd, tr);
    train_cmd->add_option("--epochs", tcfg.epochs)->capture_default_str();
    train_cmd->add_option("--batch-size", tcfg.batch_size)->capture_default_str();
    train_cmd->add_option("--lr", tcfg.learning_rate)->capture_default_str();
    train_cmd->add_option("--optimizer", optimizer, "adam | sgd_momentum")->capture_default_str();
    train_cmd->add_option("--momentum", tcfg.momentum)->capture_default_str();
    train_cmd->add_option("--dropout", tcfg.dropout)->capture_default_str();
    train_cmd->add_option("--train-fraction", tcfg.train_fraction)->capture_default_str();
    train_cmd->add_option("--warmup-steps", tcfg.warmup_steps)->capture_default_str();
    train_cmd->add_flag("--augment", augment, "train on audio passed through the power-line channel");
    train_cmd->add_option("--noiseless-every", noiseless_every, "with --augment: every n-th clip without noise")
        ->capture_default_str();
    train_cmd->add_option("--note", note, "free text stored in the checkpoint sidecar");

    // classify --------------------------------------------------------------
    std::string cl_model, cl_out;
    std::vector<std::string> cl_in;
    auto* classify = app.add_subcommand("classify", "predict the digit in WAV files");
    classify->add_option("--model", cl_model, "classifier checkpoint")->required();
    classify->add_option("--in", cl_in, "WAV file(s)")->required();
    classify->add_option("--out", cl_out, "write classify.csv here");

    // eval ------------------------------------------------------------------
    Common ev;
    auto* eval = app.add_subcommand("eval", "accuracy and confusion matrix of a model on a clean labelled corpus");
    add_common(eval, ev);
    eval->add_option("--model", ev.model, "classifier checkpoint")->required();

    // sweep -----------------------------------------------------------------
    Common sw;
    std::string sw_kind;
    std::vector<double> sw_noise;
    auto* sweep = app.add_subcommand("sweep", "volume or acoustic-noise sweep");
    add_common(sweep, sw);
    sweep->add_option("--kind", sw_kind, "volume | noise (default: the config's kind, else volume)");
    sweep->add_option("--model", sw.model, "classifier checkpoint");
    sweep->add_option("--noise-db", sw_noise, "ambient noise level in dB SPL (repeatable)");

    // profiles --------------------------------------------------------------
    std::string pr_registry;
    auto* profiles = app.add_subcommand("profiles", "device profiles");
    profiles->require_subcommand(1);
    auto* profiles_list = profiles->add_subcommand("list", "print the device registry");
    profiles_list->add_option("--registry", pr_registry, "registry file (default: built-in)");

    // corpus ----------------------------------------------------------------
    std::string co_source = "synthetic-digits", co_out = "corpus";
    auto* corpus_cmd = app.add_subcommand("corpus", "write a corpus as 16-bit WAV files");
    corpus_cmd->add_option("--source", co_source, "synthetic-digits[:...] or synthetic-commands[:...]")
        ->capture_default_str();
    corpus_cmd->add_option("--out", co_out, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*inject) {
            ExperimentSpec s = build_spec(inj, ExperimentKind::injection_eval);
            if (inject->count("--k"))
                s.injection_k = inj_k;
            s.validate();
            if (!inj_in.empty()) {
                std::vector<DeviceProfile> store;
                InjectionConfig cfg;
                cfg.k = s.injection_k;
                cfg.generator_noise_v = s.injection_noise_v;
                cfg.device = single_device(s, store);
                const AudioBuffer audio = load_wav(inj_in);
                const InjectionTrial t = inject_once(audio, cfg, derive_seed(s.seed, 0));
                make_dir(s.out);
                save_wav(t.recorded, fs::path(s.out) / "injected.wav");
                if (liveness)
                    save_wav(resample(t.recorded, 16000), fs::path(s.out) / "injected_16k.wav");
                Report r = make_report(s);
                r.add("injection", cfg.device.name, fs::path(inj_in).filename().string(), "snr_db", t.snr_db);
                r.add("injection", cfg.device.name, fs::path(inj_in).filename().string(), "correlation",
                      t.correlation);
                finish(r, s.out);
                return 0;
            }
            const auto corpus = spec_corpus(s);
            const auto devices = resolve_devices(s);
            finish(run_injection_eval(s, corpus, devices), s.out);
            if (liveness) {
                // preprocessed copies a liveness detector would see
                for (const auto& d : devices) {
                    InjectionConfig cfg;
                    cfg.k = s.injection_k;
                    cfg.generator_noise_v = s.injection_noise_v;
                    cfg.device = d;
                    const fs::path dir = fs::path(s.out) / "liveness_16k" / d.name;
                    make_dir(dir);
                    for (size_t i = 0; i < corpus.size(); ++i) {
                        const InjectionTrial t = inject_once(corpus[i].audio, cfg, derive_seed(s.seed, i));
                        save_wav(resample(t.recorded, 16000), dir / corpus[i].file_name());
                    }
                }
            }
            return 0;
        }

        if (*eavesdrop) {
            ExperimentSpec s = build_spec(eav, ExperimentKind::eavesdrop_eval);
            if (eavesdrop->count("--k"))
                s.eavesdrop_k = eav_k;
            s.validate();
            if (!eav_in.empty()) {
                const AudioBuffer audio = load_wav(eav_in);
                const EavesdropTrial t = eavesdrop_once(audio, EavesdropConfig{}, s.eavesdrop_k);
                make_dir(s.out);
                save_wav(t.recovered, fs::path(s.out) / "recovered.wav");
                Report r = make_report(s);
                const std::string cond = fs::path(eav_in).filename().string();
                r.add("eavesdrop", "speaker-wire", cond, "snr_db", t.snr_db);
                r.add("eavesdrop", "speaker-wire", cond, "band_correlation", t.correlation_band);
                finish(r, s.out);
                return 0;
            }
            finish(run_eavesdrop_eval(s, spec_corpus(s), resolve_devices(s)), s.out);
            return 0;
        }

        if (*powerline) {
            ExperimentSpec s = build_spec(pl, ExperimentKind::powerline_eval);
            if (pl_no_noise)
                s.noise_enabled = false;
            if (!pl_in.empty()) {
                std::vector<DeviceProfile> store;
                const DeviceProfile& d = single_device(s, store);
                PowerlineConfig cfg = powerline_config_for(d);
                cfg.noise.enabled = s.noise_enabled;
                const AudioBuffer audio = load_wav(pl_in);
                const LeakTrial t = leak_once(audio, cfg, s.volumes.front(), derive_seed(s.seed, 0));
                make_dir(s.out);
                write_trace_csv(t.trace, fs::path(s.out) / "current.csv");
                save_wav(t.primitive, fs::path(s.out) / "primitive.wav");
                save_wav(t.cleaned, fs::path(s.out) / "cleaned.wav");
                Report r = make_report(s);
                const std::string cond = "volume=" + text::format_double(s.volumes.front());
                if (t.leaked_snr_db)
                    r.add("powerline", d.name, cond, "leaked_snr_db", *t.leaked_snr_db);
                if (!s.model.empty()) {
                    const Prediction p = predict(load_checkpoint(s.model), featurize(t.cleaned));
                    print_prediction(fs::path(pl_in).filename().string(), p);
                    r.add("powerline", d.name, cond, "digit", p.digit);
                    r.add("powerline", d.name, cond, "probability", p.probabilities[static_cast<size_t>(p.digit)]);
                }
                finish(r, s.out);
                return 0;
            }
            require(!s.model.empty(), "corpus evaluation needs --model");
            finish(run_powerline_eval(s, spec_corpus(s), resolve_devices(s), load_checkpoint(s.model)), s.out);
            return 0;
        }

        if (*denoise) {
            const CurrentTrace trace = read_trace<Amperes>(dn_trace);
            const CurrentTrace idle = read_trace<Amperes>(dn_idle);
            const AudioBuffer primitive = highpass_trace(trace, dn_hp);
            const double gain = primitive.samples.cwiseAbs().maxCoeff();
            require(gain > 0, "trace is constant after high-pass filtering", Errc::degenerate_trace);
            AudioBuffer idle_audio = highpass_trace(idle, dn_hp);
            require(idle_audio.rate == primitive.rate, "idle and signal traces must share a sampling rate");
            idle_audio.samples /= gain;
            const NoiseProfile profile = estimate_noise(idle_audio);
            const AudioBuffer cleaned =
                spectral_subtract(AudioBuffer(primitive.samples / gain, primitive.rate), profile, dn_floor);
            make_dir(dn_out);
            save_wav(AudioBuffer(primitive.samples / gain, primitive.rate), fs::path(dn_out) / "primitive.wav");
            save_wav(cleaned, fs::path(dn_out) / "cleaned.wav");
            write_noise_profile_csv(profile, fs::path(dn_out) / "noise_profile.csv");
            std::cout << (fs::path(dn_out) / "cleaned.wav").string() << '\n';
            return 0;
        }

        if (*train_cmd) {
            ExperimentSpec s = build_spec(tr, ExperimentKind::powerline_eval);
            if (s.corpus == ExperimentSpec{}.corpus) // the default corpus is the held-out test set
                s.corpus = "synthetic-digits:speakers=30,reps=5,seed=1,prefix=trn";
            tcfg.optimizer = parse_optimizer(optimizer);
            tcfg.seed = s.seed;
            tcfg.validate();
            const auto corpus = spec_corpus(s);
            const auto data =
                augment ? channel_features(corpus, resolve_devices(s), derive_seed(s.seed, 4), noiseless_every)
                        : clean_features(corpus);
            Report r = make_report(s);
            TrainResult res = train(data, tcfg, [&](int epoch, double loss, double val) {
                std::fprintf(stderr, "epoch %d loss %.5f val %.4f\n", epoch, loss, val);
            });
            for (size_t e = 0; e < res.epoch_loss.size(); ++e) {
                const std::string cond = "epoch=" + std::to_string(e + 1);
                r.add("training", "-", cond, "loss", res.epoch_loss[e]);
                if (e < res.val_accuracy.size())
                    r.add("training", "-", cond, "val_accuracy", res.val_accuracy[e]);
            }
            r.add("training", "-", "final", "train_size", static_cast<double>(res.train_size));
            r.add("training", "-", "final", "val_size", static_cast<double>(res.val_size));
            make_dir(s.out);
            CheckpointMeta meta{s.seed, config_hash(s), note};
            save_checkpoint(res.model, fs::path(s.out) / "model.bin", meta);
            std::cout << (fs::path(s.out) / "model.bin").string() << '\n';
            finish(r, s.out);
            return 0;
        }

        if (*classify) {
            const DigitModel model = load_checkpoint(cl_model);
            Report r;
            for (const auto& file : cl_in) {
                const Prediction p = predict(model, featurize(load_wav(file)));
                print_prediction(file, p);
                const std::string name = fs::path(file).filename().string();
                r.add("classify", "-", name, "digit", p.digit);
                for (int d = 0; d < 10; ++d)
                    r.add("classify", "-", name, "p" + std::to_string(d), p.probabilities[static_cast<size_t>(d)]);
            }
            if (!cl_out.empty())
                finish(r, cl_out);
            return 0;
        }

        if (*eval) {
            ExperimentSpec s = build_spec(ev, ExperimentKind::powerline_eval);
            const DigitModel model = load_checkpoint(s.model);
            const Evaluation e = evaluate(model, clean_features(spec_corpus(s)));
            Report r = make_report(s);
            r.add("eval", "clean", "-", "accuracy", e.accuracy);
            r.add("eval", "clean", "-", "utterances", e.count);
            for (int t = 0; t < 10; ++t)
                for (int p = 0; p < 10; ++p)
                    r.add("confusion", "clean", "-", "true=" + std::to_string(t) + ";pred=" + std::to_string(p),
                          e.confusion(t, p));
            std::cout << "accuracy " << text::format_double(e.accuracy) << " over " << e.count << '\n';
            finish(r, s.out);
            return 0;
        }

        if (*sweep) {
            ExperimentKind kind = ExperimentKind::volume_sweep;
            if (!sw_kind.empty())
                kind = parse_experiment_kind(sw_kind.find('_') == std::string::npos ? sw_kind + "_sweep" : sw_kind);
            ExperimentSpec s = build_spec(sw, kind, sw_kind.empty());
            require(s.kind == ExperimentKind::volume_sweep || s.kind == ExperimentKind::noise_sweep,
                    "sweep takes kind volume or noise");
            if (s.kind == ExperimentKind::volume_sweep && sw.volumes.empty() && sw.config.empty())
                s.volumes = {1.0, 0.75, 0.5, 0.25};
            if (!sw_noise.empty())
                s.acoustic_noise_levels = sw_noise;
            s.validate();
            finish(run_experiment(s), s.out);
            return 0;
        }

        if (*profiles_list) {
            const auto devices = pr_registry.empty() ? builtin_devices() : load_device_registry(pr_registry);
            std::cout << format_device_registry(devices);
            return 0;
        }

        if (*corpus_cmd) {
            const auto corpus = resolve_corpus(co_source);
            write_corpus(corpus, co_out);
            std::cout << corpus.size() << " files in " << co_out << '\n';
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return is_validation_error(e.code()) ? kExitValidation : kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
