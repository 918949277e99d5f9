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

// Experiment orchestration: injection, eavesdropping and power-line
// evaluations across device profiles, volume and acoustic-noise sweeps, and
// CSV reports.
//
// Every per-utterance random stream is seeded from (master seed, utterance
// index) only, so devices, volumes and noise levels see the same draws and
// a (spec, seed, model) triple fixes every report byte.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "powerleak/channel.hpp"
#include "powerleak/classifier.hpp"
#include "powerleak/corpus.hpp"
#include "powerleak/denoise.hpp"
#include "powerleak/devices.hpp"

namespace powerleak {

inline constexpr std::string_view kToolkitVersion = "powerleak 0.1.0";

/// Speech level assumed for the air channel, dB SPL. An ambient noise level
/// of L dB SPL becomes an additive mixture at (kSpeechLevelDb - L) dB SNR.
inline constexpr double kSpeechLevelDb = 65.0;

enum class ExperimentKind { injection_eval, eavesdrop_eval, powerline_eval, volume_sweep, noise_sweep };

ExperimentKind parse_experiment_kind(std::string_view name);
std::string_view to_string(ExperimentKind kind);

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::powerline_eval;
    std::vector<std::string> devices; // empty = every registered device
    /// A directory of WAVs, or `synthetic-digits[:speakers=N,reps=N,seed=N]`
    /// or `synthetic-commands[:count=N,seed=N]`.
    std::string corpus = "synthetic-digits";
    std::vector<double> volumes{1.0};
    std::vector<double> acoustic_noise_levels{25, 35, 45, 55, 65, 75, 85};
    std::uint64_t seed = 1;
    std::string out = "out";
    std::string model;           // checkpoint for power-line kinds
    std::string device_registry; // empty = built-in profiles
    int max_utterances = 0;      // 0 = whole corpus

    double success_threshold = 0.9; // correlation counted as a successful injection
    double injection_k = 0.1;
    double injection_noise_v = 5e-3; // signal-generator noise, volts rms
    double eavesdrop_k = 0.5;
    bool noise_enabled = true;
    double touch_period = 0;   // seconds between screen-touch bursts on the session timeline; 0 = none
    double touch_duration = 0.3;
    double touch_gain_db = 20;

    void validate() const;
};

/// `key = value` lines; `#` starts a comment. Unknown keys are errors.
ExperimentSpec parse_experiment(std::string_view text);
ExperimentSpec load_experiment(const std::filesystem::path& path);
/// Canonical text form: every field, fixed order. Parsing it gives back an
/// equal spec.
std::string format_experiment(const ExperimentSpec& spec);
/// 16 hex digits of FNV-1a over format_experiment(), ignoring `out`.
std::string config_hash(const ExperimentSpec& spec);

std::vector<Utterance> resolve_corpus(const std::string& source, double command_rate = 16000);
/// Registry named by `spec.device_registry`, filtered to `spec.devices`.
std::vector<DeviceProfile> resolve_devices(const ExperimentSpec& spec);

struct ReportRow {
    std::string family;
    std::string device;
    std::string condition;
    std::string metric;
    double value = 0;
};

struct Report {
    std::vector<ReportRow> rows;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<std::string> notes; // extra provenance lines

    /// Rejects non-finite values.
    void add(std::string family, std::string device, std::string condition, std::string metric, double value);
    std::optional<double> find(std::string_view family, std::string_view device, std::string_view condition,
                               std::string_view metric) const;
    void append(const Report& other);
};

Report make_report(const ExperimentSpec& spec);

/// One CSV per family, `<family>.csv`, header `device,condition,metric,value`
/// after `#` provenance lines. An empty report writes a header-only
/// `report.csv`. Returns the files written.
std::vector<std::filesystem::path> emit_report(const Report& report, const std::filesystem::path& dir);

/// Ambient sound around the phone. The electric channels take it as an input
/// and must ignore it; only the air path hears it.
struct AcousticEnvironment {
    std::optional<double> noise_db_spl; // none = quiet room
};

// Single-utterance pipelines ---------------------------------------------

struct InjectionTrial {
    AudioBuffer recorded;      // at the device microphone rate
    double snr_db = 0;         // voice band (0-8 kHz), speech against silence padding
    double correlation = 0;    // against the reference, 16 kHz
};

InjectionTrial inject_once(const AudioBuffer& audio, const InjectionConfig& cfg, std::uint64_t seed,
                           const AcousticEnvironment& env = {});

struct EavesdropTrial {
    AudioBuffer recovered;     // at the eavesdrop ADC rate
    double snr_db = 0;         // against the full-band reference
    double correlation_band = 0; // against the reference band-limited by the ADC rate
};

EavesdropTrial eavesdrop_once(const AudioBuffer& audio, const EavesdropConfig& cfg, double k,
                              const AcousticEnvironment& env = {});

/// Device microphone recording through the air: the clip at 65 dB SPL plus
/// ambient noise, sampled at the device rate with 16-bit quantisation.
/// Quiet rooms use a 30 dB SPL floor.
AudioBuffer air_record(const AudioBuffer& audio, const DeviceProfile& device, const AcousticEnvironment& env,
                       std::uint64_t seed);

struct LeakTrial {
    CurrentTrace trace;
    AudioBuffer primitive;
    AudioBuffer cleaned;
    double noise_rms = 0;
    std::optional<double> leaked_snr_db; // var(leak) / var(firmware noise); none when noise is off
};

/// synthesize_current_trace -> recover_primitive -> spectral_subtract against
/// an idle recording taken with the same firmware noise level. Denoising is
/// skipped when the noise model is disabled.
LeakTrial leak_once(const AudioBuffer& audio, const PowerlineConfig& cfg, double volume, std::uint64_t seed,
                    const AcousticEnvironment& env = {});

// Evaluations ------------------------------------------------------------

Report run_injection_eval(const ExperimentSpec& spec, const std::vector<Utterance>& corpus,
                          const std::vector<DeviceProfile>& devices);
Report run_eavesdrop_eval(const ExperimentSpec& spec, const std::vector<Utterance>& corpus,
                          const std::vector<DeviceProfile>& devices);
Report run_powerline_eval(const ExperimentSpec& spec, const std::vector<Utterance>& corpus,
                          const std::vector<DeviceProfile>& devices, const DigitModel& model);
Report volume_sweep(const ExperimentSpec& spec, const std::vector<Utterance>& corpus,
                    const std::vector<DeviceProfile>& devices, const DigitModel& model);
/// Air-baseline track plus the electric-channel invariance track. The model is
/// optional; without it the power-line pipeline is hashed up to the cleaned
/// audio only.
Report noise_sweep(const ExperimentSpec& spec, const std::vector<Utterance>& corpus,
                   const std::vector<DeviceProfile>& devices, const DigitModel* model);

/// Resolves corpus, devices and model from `spec` and runs `spec.kind`.
Report run_experiment(const ExperimentSpec& spec);

// Training data ----------------------------------------------------------

/// Labelled features of digit utterances; non-digit entries are skipped.
std::vector<LabeledFeature> clean_features(const std::vector<Utterance>& corpus);

/// Digit utterances passed through the power-line channel at volume 1, cycling
/// through `devices`; every `noiseless_every`-th utterance (0 = never) goes
/// through with the noise model off.
std::vector<LabeledFeature> channel_features(const std::vector<Utterance>& corpus,
                                             const std::vector<DeviceProfile>& devices, std::uint64_t seed,
                                             int noiseless_every = 10);

} // namespace powerleak
