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

#include "powerleak/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "powerleak/config_text.hpp"
#include "powerleak/random.hpp"

namespace powerleak {

using Eigen::Index;
using Eigen::VectorXd;

ExperimentKind parse_experiment_kind(std::string_view name)
{
    const std::string n = text::lower(text::trim(name));
    if (n == "injection_eval")
        return ExperimentKind::injection_eval;
    if (n == "eavesdrop_eval")
        return ExperimentKind::eavesdrop_eval;
    if (n == "powerline_eval")
        return ExperimentKind::powerline_eval;
    if (n == "volume_sweep")
        return ExperimentKind::volume_sweep;
    if (n == "noise_sweep")
        return ExperimentKind::noise_sweep;
    fail(Errc::invalid_argument, "unknown experiment kind '" + std::string(name) + "'");
}

std::string_view to_string(ExperimentKind kind)
{
    switch (kind) {
    case ExperimentKind::injection_eval: return "injection_eval";
    case ExperimentKind::eavesdrop_eval: return "eavesdrop_eval";
    case ExperimentKind::powerline_eval: return "powerline_eval";
    case ExperimentKind::volume_sweep: return "volume_sweep";
    case ExperimentKind::noise_sweep: return "noise_sweep";
    }
    return "?";
}

void ExperimentSpec::validate() const
{
    require(!corpus.empty(), "corpus must be set");
    require(!volumes.empty(), "at least one volume is required");
    for (double v : volumes)
        require(v > 0 && v <= 1, "volumes must lie in (0, 1]");
    if (kind == ExperimentKind::volume_sweep)
        for (size_t i = 1; i < volumes.size(); ++i)
            require(volumes[i] < volumes[i - 1], "volume sweep levels must be strictly descending");
    for (double l : acoustic_noise_levels)
        require(std::isfinite(l), "acoustic noise levels must be finite");
    if (kind == ExperimentKind::noise_sweep)
        require(!acoustic_noise_levels.empty(), "noise sweep needs at least one acoustic noise level");
    require(max_utterances >= 0, "max_utterances must be >= 0");
    require(success_threshold > 0 && success_threshold <= 1, "success_threshold must lie in (0, 1]");
    require(injection_k > 0 && eavesdrop_k > 0, "channel gains must be positive");
    require(injection_noise_v >= 0, "injection_noise_v must be non-negative");
    require(touch_period >= 0, "touch_period must be non-negative");
    require(touch_period == 0 || (touch_duration > 0 && touch_duration < touch_period),
            "touch_duration must be positive and shorter than touch_period");
    require(std::isfinite(touch_gain_db), "touch_gain_db must be finite");
}

namespace {

std::vector<double> parse_doubles(const std::string& v, std::string_view key)
{
    std::vector<double> out;
    for (const auto& item : text::split_list(v))
        out.push_back(text::to_double(item, key));
    return out;
}

std::string join_doubles(const std::vector<double>& v)
{
    std::string s;
    for (size_t i = 0; i < v.size(); ++i)
        s += (i ? ", " : "") + text::format_double(v[i]);
    return s;
}

std::uint64_t to_u64(const std::string& v, std::string_view key)
{
    const long long x = text::to_int(v, key);
    require(x >= 0, std::string(key) + " must be non-negative");
    return static_cast<std::uint64_t>(x);
}

} // namespace

ExperimentSpec parse_experiment(std::string_view input)
{
    ExperimentSpec s;
    for (const auto& section : text::parse_sections(input)) {
        require(section.name.empty() || text::lower(section.name) == "experiment",
                "line " + std::to_string(section.line) + ": unexpected section [" + section.name + "]");
        for (const auto& [key, value] : section.values) {
            if (key == "kind")
                s.kind = parse_experiment_kind(value);
            else if (key == "devices") {
                s.devices.clear();
                if (text::lower(value) != "all")
                    s.devices = text::split_list(value);
            } else if (key == "corpus")
                s.corpus = value;
            else if (key == "volumes")
                s.volumes = parse_doubles(value, key);
            else if (key == "acoustic_noise_levels")
                s.acoustic_noise_levels = parse_doubles(value, key);
            else if (key == "seed")
                s.seed = to_u64(value, key);
            else if (key == "out")
                s.out = value;
            else if (key == "model")
                s.model = value;
            else if (key == "device_registry")
                s.device_registry = value;
            else if (key == "max_utterances")
                s.max_utterances = static_cast<int>(text::to_int(value, key));
            else if (key == "success_threshold")
                s.success_threshold = text::to_double(value, key);
            else if (key == "injection_k")
                s.injection_k = text::to_double(value, key);
            else if (key == "injection_noise_v")
                s.injection_noise_v = text::to_double(value, key);
            else if (key == "eavesdrop_k")
                s.eavesdrop_k = text::to_double(value, key);
            else if (key == "noise_enabled")
                s.noise_enabled = text::to_bool(value, key);
            else if (key == "touch_period")
                s.touch_period = text::to_double(value, key);
            else if (key == "touch_duration")
                s.touch_duration = text::to_double(value, key);
            else if (key == "touch_gain_db")
                s.touch_gain_db = text::to_double(value, key);
            else
                fail(Errc::invalid_argument, "unknown experiment key '" + key + "'");
        }
    }
    s.validate();
    return s;
}

ExperimentSpec load_experiment(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        fail(Errc::missing_file, path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_experiment(buf.str());
}

std::string format_experiment(const ExperimentSpec& s)
{
    std::string devices;
    for (const auto& d : s.devices)
        devices += (devices.empty() ? "" : ", ") + d;
    std::ostringstream out;
    out << "kind = " << to_string(s.kind) << '\n'
        << "devices = " << (s.devices.empty() ? "all" : devices) << '\n'
        << "corpus = " << s.corpus << '\n'
        << "volumes = " << join_doubles(s.volumes) << '\n'
        << "acoustic_noise_levels = " << join_doubles(s.acoustic_noise_levels) << '\n'
        << "seed = " << s.seed << '\n'
        << "out = " << s.out << '\n'
        << "model = " << s.model << '\n'
        << "device_registry = " << s.device_registry << '\n'
        << "max_utterances = " << s.max_utterances << '\n'
        << "success_threshold = " << text::format_double(s.success_threshold) << '\n'
        << "injection_k = " << text::format_double(s.injection_k) << '\n'
        << "injection_noise_v = " << text::format_double(s.injection_noise_v) << '\n'
        << "eavesdrop_k = " << text::format_double(s.eavesdrop_k) << '\n'
        << "noise_enabled = " << (s.noise_enabled ? "true" : "false") << '\n'
        << "touch_period = " << text::format_double(s.touch_period) << '\n'
        << "touch_duration = " << text::format_double(s.touch_duration) << '\n'
        << "touch_gain_db = " << text::format_double(s.touch_gain_db) << '\n';
    return out.str();
}

std::string config_hash(const ExperimentSpec& spec)
{
    // where the results go is not part of the experiment
    ExperimentSpec keyed = spec;
    keyed.out.clear();
    const std::uint64_t h = fnv1a(format_experiment(keyed));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<Utterance> resolve_corpus(const std::string& source, double command_rate)
{
    const auto colon = source.find(':');
    const std::string head = text::lower(text::trim(source.substr(0, colon)));
    std::map<std::string, std::string> opts;
    const bool synthetic = head == "synthetic-digits" || head == "synthetic-commands";
    if (synthetic && colon != std::string::npos) {
        for (const auto& kv : text::split_list(source.substr(colon + 1))) {
            const auto eq = kv.find('=');
            require(eq != std::string::npos, "corpus option '" + kv + "' must be key=value");
            opts[text::lower(text::trim(kv.substr(0, eq)))] = text::trim(kv.substr(eq + 1));
        }
    }
    const auto opt = [&](const std::string& key, const std::string& fallback) {
        const auto it = opts.find(key);
        return it == opts.end() ? fallback : it->second;
    };
    if (head == "synthetic-digits") {
        SyntheticCorpusSpec c;
        c.speakers = static_cast<int>(text::to_int(opt("speakers", "15"), "speakers"));
        c.repetitions = static_cast<int>(text::to_int(opt("reps", "2"), "reps"));
        c.seed = to_u64(opt("seed", "2"), "seed");
        c.rate = text::to_double(opt("rate", "8000"), "rate");
        c.speaker_prefix = opt("prefix", "tst");
        return synthetic_digit_corpus(c);
    }
    if (head == "synthetic-commands") {
        const int count = static_cast<int>(text::to_int(opt("count", "100"), "count"));
        const std::uint64_t seed = to_u64(opt("seed", "3"), "seed");
        const double rate = text::to_double(opt("rate", text::format_double(command_rate)), "rate");
        return synthetic_command_corpus(count, seed, rate);
    }
    return load_corpus(source);
}

std::vector<DeviceProfile> resolve_devices(const ExperimentSpec& spec)
{
    const std::vector<DeviceProfile> registry =
        spec.device_registry.empty() ? builtin_devices() : load_device_registry(spec.device_registry);
    if (spec.devices.empty())
        return registry;
    std::vector<DeviceProfile> out;
    for (const auto& name : spec.devices)
        out.push_back(find_device(registry, name));
    return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

void Report::add(std::string family, std::string device, std::string condition, std::string metric, double value)
{
    require(std::isfinite(value), "report metric '" + metric + "' for '" + device + "' is not finite");
    rows.push_back({std::move(family), std::move(device), std::move(condition), std::move(metric), value});
}

std::optional<double> Report::find(std::string_view family, std::string_view device, std::string_view condition,
                                   std::string_view metric) const
{
    for (const auto& r : rows)
        if (r.family == family && r.device == device && r.condition == condition && r.metric == metric)
            return r.value;
    return std::nullopt;
}

void Report::append(const Report& other)
{
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

Report make_report(const ExperimentSpec& spec)
{
    Report r;
    r.seed = spec.seed;
    r.config_hash = config_hash(spec);
    r.notes.push_back("noise_db_convention: ambient level in dB SPL against speech at " +
                      text::format_double(kSpeechLevelDb) + " dB SPL; air mixture SNR = " +
                      text::format_double(kSpeechLevelDb) + " - noise_db");
    return r;
}

namespace {

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string q = "\"";
    for (char c : s)
        q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

} // namespace

std::vector<std::filesystem::path> emit_report(const Report& report, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        fail(Errc::unwritable_path, dir.string() + ": " + ec.message());

    std::vector<std::string> families;
    for (const auto& r : report.rows)
        if (std::find(families.begin(), families.end(), r.family) == families.end())
            families.push_back(r.family);
    if (families.empty())
        families.push_back("report");

    std::vector<std::filesystem::path> written;
    for (const auto& family : families) {
        const auto path = dir / (family + ".csv");
        std::ofstream out(path, std::ios::trunc | std::ios::binary);
        if (!out)
            fail(Errc::unwritable_path, path.string());
        out << "# toolkit_version: " << kToolkitVersion << '\n'
            << "# seed: " << report.seed << '\n'
            << "# config_hash: " << report.config_hash << '\n';
        for (const auto& n : report.notes)
            out << "# " << n << '\n';
        out << "device,condition,metric,value\n";
        for (const auto& r : report.rows)
            if (r.family == family)
                out << csv_field(r.device) << ',' << csv_field(r.condition) << ',' << csv_field(r.metric) << ','
                    << text::format_double(r.value) << '\n';
        if (!out)
            fail(Errc::io_error, path.string());
        written.push_back(path);
    }
    return written;
}

// ---------------------------------------------------------------------------
// Single-utterance pipelines
// ---------------------------------------------------------------------------

namespace {

constexpr double kVoiceBandRate = 16000;
constexpr double kQuietRoomDb = 30;

// Speech region of a clean clip: first to last sample above 10% of the peak.
Segment speech_region(const VectorXd& x)
{
    const double thr = 0.1 * x.cwiseAbs().maxCoeff();
    Index first = 0, last = x.size();
    while (first < x.size() && std::abs(x[first]) <= thr)
        ++first;
    while (last > first && std::abs(x[last - 1]) <= thr)
        --last;
    return {first, last};
}

double corr_prefix(const VectorXd& a, const VectorXd& b)
{
    const Index n = std::min(a.size(), b.size());
    require(n > 1, "signals too short to correlate");
    return pearson(a.head(n), b.head(n));
}

std::string volume_condition(double v)
{
    return "volume=" + text::format_double(v);
}

std::uint64_t hash_samples(const VectorXd& x, std::uint64_t h)
{
    return fnv1a(std::string_view(reinterpret_cast<const char*>(x.data()), static_cast<size_t>(x.size()) * sizeof(double)),
                 h);
}

} // namespace

InjectionTrial inject_once(const AudioBuffer& audio, const InjectionConfig& cfg, std::uint64_t seed,
                           const AcousticEnvironment&)
{
    // The injected signal enters through the microphone wire; the phone's
    // acoustic port plays no part, so the environment is deliberately unused.
    const VoltageTrace wire = modulate_injection(audio, cfg);
    const VoltageTrace analog = drive_dac(wire, cfg, seed);
    const VoltageTrace smoothed = capacitor_smooth(analog, cfg.capacitor_cutoff);

    InjectionTrial t;
    t.recorded = phone_record_injected(smoothed, cfg);

    const AudioBuffer band = resample(t.recorded, kVoiceBandRate);
    const AudioBuffer ref = resample(audio, kVoiceBandRate);
    t.correlation = corr_prefix(band.samples, ref.samples);

    const Index n = std::min(band.size(), ref.size());
    const Segment speech = speech_region(ref.samples.head(n));
    const auto margin = static_cast<Index>(0.01 * kVoiceBandRate);
    const Segment lead{0, std::max<Index>(0, speech.begin - margin)};
    const Segment tail{std::min(n, speech.end + margin), n};
    const Segment quiet = lead.length() >= tail.length() ? lead : tail;
    require(quiet.length() >= 64 && speech.length() > 0, "clip needs silence padding to measure injection SNR");
    t.snr_db = segment_snr_db(AudioBuffer(band.samples.head(n), kVoiceBandRate), speech, quiet);
    return t;
}

EavesdropTrial eavesdrop_once(const AudioBuffer& audio, const EavesdropConfig& cfg, double k,
                              const AcousticEnvironment&)
{
    // The speaker wire is measured electrically; room noise never reaches it.
    const VoltageTrace wire = speaker_wire_voltage(audio, cfg, k);
    const auto sampled = adc_sample(wire, cfg.adc_rate, cfg.adc_bits, cfg.adc_range);
    EavesdropTrial t;
    t.recovered = demodulate_eavesdrop(sampled.trace, cfg);
    t.correlation_band = corr_prefix(t.recovered.samples, resample(audio, cfg.adc_rate).samples);
    t.snr_db = reference_snr_db(resample(t.recovered, audio.rate).samples, audio.samples);
    return t;
}

AudioBuffer air_record(const AudioBuffer& audio, const DeviceProfile& device, const AcousticEnvironment& env,
                       std::uint64_t seed)
{
    require(audio.size() > 0, "empty clip");
    const double level = env.noise_db_spl.value_or(kQuietRoomDb);
    const double p = mean_power(audio.samples);
    require(p > 0, "clip has no energy");
    const double noise_rms = std::sqrt(p) * std::pow(10.0, -(kSpeechLevelDb - level) / 20.0);
    const VectorXd mix = audio.samples + noise_rms * shaped_noise(audio.size(), NoiseShape::pink, seed);
    AudioBuffer rec = resample(AudioBuffer(mix, audio.rate), device.f_s);
    for (Index i = 0; i < rec.size(); ++i)
        rec.samples[i] = std::clamp(std::round(rec.samples[i] * 32768.0), -32768.0, 32767.0) / 32768.0;
    return rec;
}

LeakTrial leak_once(const AudioBuffer& audio, const PowerlineConfig& cfg, double volume, std::uint64_t seed,
                    const AcousticEnvironment&)
{
    // The charging current depends on what the loudspeaker is driven with,
    // not on the sound already in the room.
    const CurrentComponents c = current_components(audio, cfg, volume, seed);
    const VectorXd total = c.total();
    require(total.size() > 0, "empty clip");
    AdcOutput adc = adc_convert(total, cfg.adc_rate, cfg.adc_rate, cfg.adc_bits, auto_range(total));

    LeakTrial t;
    t.trace = CurrentTrace(std::move(adc.values), cfg.adc_rate);
    t.noise_rms = c.noise_rms;
    t.primitive = recover_primitive(t.trace);
    const auto variance = [](const VectorXd& v) { return (v.array() - v.mean()).square().mean(); };
    const double var_leak = variance(c.leak.values), var_noise = variance(c.noise.values);
    if (var_leak > 0 && var_noise > 0)
        t.leaked_snr_db = snr_db(var_leak, var_noise);
    if (!cfg.noise.enabled || c.noise_rms == 0) {
        t.cleaned = t.primitive;
        return t;
    }
    const double gain = highpass_trace(t.trace).samples.cwiseAbs().maxCoeff();
    const CurrentTrace idle = synthesize_idle_trace(1.0, cfg, c.noise_rms, derive_seed(seed, 0x1D1Eu));
    AudioBuffer idle_audio = highpass_trace(idle);
    idle_audio.samples /= gain;
    t.cleaned = spectral_subtract(t.primitive, estimate_noise(idle_audio));
    return t;
}

// ---------------------------------------------------------------------------
// Evaluations
// ---------------------------------------------------------------------------

namespace {

void require_corpus(const std::vector<Utterance>& corpus)
{
    if (corpus.empty())
        fail(Errc::empty_dataset, "corpus is empty");
}

void require_devices(const std::vector<DeviceProfile>& devices)
{
    require(!devices.empty(), "at least one device profile is required");
}

InjectionConfig injection_config(const ExperimentSpec& spec, const DeviceProfile& d)
{
    InjectionConfig cfg;
    cfg.k = spec.injection_k;
    cfg.generator_noise_v = spec.injection_noise_v;
    cfg.device = d;
    return cfg;
}

PowerlineConfig powerline_config(const ExperimentSpec& spec, const DeviceProfile& d)
{
    PowerlineConfig cfg = powerline_config_for(d);
    cfg.noise.enabled = spec.noise_enabled;
    return cfg;
}

// Touch bursts placed on the session timeline (utterances back to back),
// clipped to utterance i. Returns whether any burst overlaps it.
bool bursts_for(const ExperimentSpec& spec, double session_start, double duration, std::vector<TouchBurst>& out)
{
    out.clear();
    if (spec.touch_period <= 0)
        return false;
    const double end = session_start + duration;
    // bursts start half a period into each cycle
    auto m = static_cast<long>(std::floor((session_start - 0.5 * spec.touch_period) / spec.touch_period));
    for (m = std::max(m, 0L);; ++m) {
        const double b0 = (static_cast<double>(m) + 0.5) * spec.touch_period;
        const double b1 = b0 + spec.touch_duration;
        if (b0 >= end)
            break;
        const double lo = std::max(b0, session_start), hi = std::min(b1, end);
        if (hi > lo)
            out.push_back({lo - session_start, hi - lo, spec.touch_gain_db});
    }
    return !out.empty();
}

struct PowerlineCell {
    Evaluation eval;
    int touch_total = 0, touch_correct = 0, quiet_total = 0, quiet_correct = 0;
    double snr_sum = 0;
    int snr_count = 0;
};

PowerlineCell powerline_cell(const ExperimentSpec& spec, const std::vector<Utterance>& corpus, const DeviceProfile& d,
                             const DigitModel& model, double volume)
{
    PowerlineCell cell;
    double session = 0;
    std::vector<TouchBurst> bursts;
    for (size_t i = 0; i < corpus.size(); ++i) {
        const Utterance& u = corpus[i];
        const double start = session;
        session += u.audio.duration();
        if (u.digit < 0)
            continue;
        PowerlineConfig cfg = powerline_config(spec, d);
        const bool touched = cfg.noise.enabled && bursts_for(spec, start, u.audio.duration(), bursts);
        if (cfg.noise.enabled)
            cfg.noise.touch_bursts = bursts;
        const std::uint64_t seed = derive_seed(spec.seed, i);
        const LeakTrial t = leak_once(u.audio, cfg, volume, seed);
        const int guess = predict(model, featurize(t.cleaned)).digit;
        cell.eval.confusion(u.digit, guess) += 1;
        ++cell.eval.count;
        if (touched) {
            ++cell.touch_total;
            cell.touch_correct += guess == u.digit;
        } else {
            ++cell.quiet_total;
            cell.quiet_correct += guess == u.digit;
        }
        if (t.leaked_snr_db) {
            cell.snr_sum += *t.leaked_snr_db;
            ++cell.snr_count;
        }
    }
    if (cell.eval.count == 0)
        fail(Errc::empty_dataset, "corpus has no digit-labelled utterances");
    cell.eval.accuracy = static_cast<double>(cell.eval.confusion.trace()) / cell.eval.count;
    return cell;
}

void add_powerline_rows(Report& r, const std::string& family, const DeviceProfile& d, double volume,
                        const PowerlineCell& cell, bool with_confusion)
{
    const std::string cond = volume_condition(volume);
    r.add(family, d.name, cond, "accuracy", cell.eval.accuracy);
    r.add(family, d.name, cond, "utterances", cell.eval.count);
    r.add(family, d.name, cond, "target_snr_db", d.leaked_snr_db);
    if (cell.snr_count > 0)
        r.add(family, d.name, cond, "leaked_snr_db", cell.snr_sum / cell.snr_count);
    r.add(family, d.name, cond, "reference_accuracy", d.accuracy_ref);
    if (cell.touch_total > 0) {
        r.add(family, d.name, cond, "accuracy_touch", static_cast<double>(cell.touch_correct) / cell.touch_total);
        if (cell.quiet_total > 0)
            r.add(family, d.name, cond, "accuracy_between_bursts",
                  static_cast<double>(cell.quiet_correct) / cell.quiet_total);
    }
    if (!with_confusion)
        return;
    for (int t = 0; t < 10; ++t)
        for (int p = 0; p < 10; ++p)
            r.add("confusion", d.name, cond, "true=" + std::to_string(t) + ";pred=" + std::to_string(p),
                  cell.eval.confusion(t, p));
}

} // namespace

Report run_injection_eval(const ExperimentSpec& spec, const std::vector<Utterance>& corpus,
                          const std::vector<DeviceProfile>& devices)
{
    spec.validate();
    require_corpus(corpus);
    require_devices(devices);
    Report r = make_report(spec);
    const std::string cond = "k=" + text::format_double(spec.injection_k);
    for (const auto& d : devices) {
        const InjectionConfig cfg = injection_config(spec, d);
        double snr_sum = 0, corr_sum = 0;
        int ok = 0, successes = 0, errors = 0;
        for (size_t i = 0; i < corpus.size(); ++i) {
            try {
                const InjectionTrial t = inject_once(corpus[i].audio, cfg, derive_seed(spec.seed, i));
                snr_sum += t.snr_db;
                corr_sum += t.correlation;
                successes += t.correlation >= spec.success_threshold;
                ++ok;
            } catch (const Error& e) {
                if (!is_validation_error(e.code()))
                    throw;
                ++errors;
                r.add("injection_errors", d.name, "utterance=" + std::to_string(i),
                      "error_" + std::string(code_name(e.code())), 1);
            }
        }
        r.add("injection", d.name, cond, "trials", ok);
        r.add("injection", d.name, cond, "errors", errors);
        if (ok > 0) {
            r.add("injection", d.name, cond, "snr_db", snr_sum / ok);
            r.add("injection", d.name, cond, "mean_correlation", corr_sum / ok);
        }
        r.add("injection", d.name, cond, "success_rate", static_cast<double>(successes) / corpus.size());
        r.add("injection", d.name, cond, "reference_snr_db", d.injection_snr_db);
    }
    return r;
}

Report run_eavesdrop_eval(const ExperimentSpec& spec, const std::vector<Utterance>& corpus,
                          const std::vector<DeviceProfile>& devices)
{
    spec.validate();
    require_corpus(corpus);
    require_devices(devices);
    Report r = make_report(spec);
    const EavesdropConfig cfg;
    const std::string cond = "adc=" + text::format_double(cfg.adc_rate) + "hz";

    // The speaker-wire chain does not depend on the handset, so it runs once.
    double snr_sum = 0, corr_sum = 0, corr_min = 1;
    std::vector<double> air_sums(devices.size(), 0.0);
    for (size_t i = 0; i < corpus.size(); ++i) {
        const EavesdropTrial t = eavesdrop_once(corpus[i].audio, cfg, spec.eavesdrop_k);
        snr_sum += t.snr_db;
        corr_sum += t.correlation_band;
        corr_min = std::min(corr_min, t.correlation_band);
        for (size_t k = 0; k < devices.size(); ++k) {
            const AudioBuffer air = air_record(corpus[i].audio, devices[k], {}, derive_seed(spec.seed, i));
            air_sums[k] += reference_snr_db(resample(air, corpus[i].audio.rate).samples, corpus[i].audio.samples);
        }
    }
    const auto n = static_cast<double>(corpus.size());
    for (size_t k = 0; k < devices.size(); ++k) {
        const auto& d = devices[k];
        r.add("eavesdrop", d.name, cond, "snr_db", snr_sum / n);
        r.add("eavesdrop", d.name, cond, "band_correlation", corr_sum / n);
        r.add("eavesdrop", d.name, cond, "min_band_correlation", corr_min);
        r.add("eavesdrop", d.name, cond, "air_snr_db", air_sums[k] / n);
    }
    return r;
}

Report run_powerline_eval(const ExperimentSpec& spec, const std::vector<Utterance>& corpus,
                          const std::vector<DeviceProfile>& devices, const DigitModel& model)
{
    spec.validate();
    require_corpus(corpus);
    require_devices(devices);
    Report r = make_report(spec);
    for (const auto& d : devices)
        for (double v : spec.volumes)
            add_powerline_rows(r, "powerline", d, v, powerline_cell(spec, corpus, d, model, v), true);
    return r;
}

Report volume_sweep(const ExperimentSpec& spec, const std::vector<Utterance>& corpus,
                    const std::vector<DeviceProfile>& devices, const DigitModel& model)
{
    ExperimentSpec s = spec;
    s.kind = ExperimentKind::volume_sweep;
    s.validate();
    require_corpus(corpus);
    require_devices(devices);
    Report r = make_report(spec);
    for (const auto& d : devices) {
        std::vector<double> acc;
        for (double v : spec.volumes) {
            const PowerlineCell cell = powerline_cell(spec, corpus, d, model, v);
            add_powerline_rows(r, "volume_sweep", d, v, cell, false);
            acc.push_back(cell.eval.accuracy);
        }
        double worst_rise = 0;
        for (size_t i = 1; i < acc.size(); ++i)
            worst_rise = std::max(worst_rise, acc[i] - acc[i - 1]);
        r.add("volume_sweep", d.name, "trend", "max_step_increase", worst_rise);
        r.add("volume_sweep", d.name, "trend", "non_increasing_within_3pt", worst_rise <= 0.03 + 1e-12 ? 1 : 0);
        const auto full = std::find(spec.volumes.begin(), spec.volumes.end(), 1.0);
        const auto half = std::find(spec.volumes.begin(), spec.volumes.end(), 0.5);
        if (full != spec.volumes.end() && half != spec.volumes.end()) {
            const double a_full = acc[static_cast<size_t>(full - spec.volumes.begin())];
            const double a_half = acc[static_cast<size_t>(half - spec.volumes.begin())];
            if (a_full > 0)
                r.add("volume_sweep", d.name, "trend", "half_to_full_ratio", a_half / a_full);
        }
    }
    return r;
}

Report noise_sweep(const ExperimentSpec& spec, const std::vector<Utterance>& corpus,
                   const std::vector<DeviceProfile>& devices, const DigitModel* model)
{
    ExperimentSpec s = spec;
    s.kind = ExperimentKind::noise_sweep;
    s.validate();
    require_corpus(corpus);
    require_devices(devices);
    Report r = make_report(spec);
    const DeviceProfile& mic = devices.front();

    // Air baseline: the same clips recorded through the air at each level.
    for (double level : spec.acoustic_noise_levels) {
        const std::string cond = "noise_db=" + text::format_double(level);
        int successes = 0;
        double corr_sum = 0;
        for (size_t i = 0; i < corpus.size(); ++i) {
            const AudioBuffer& a = corpus[i].audio;
            const AudioBuffer air = air_record(a, mic, {level}, derive_seed(spec.seed, i));
            const double c = corr_prefix(resample(air, a.rate).samples, a.samples);
            corr_sum += c;
            successes += c >= spec.success_threshold;
        }
        const auto n = static_cast<double>(corpus.size());
        r.add("noise_air", mic.name, cond, "mixture_snr_db", kSpeechLevelDb - level);
        r.add("noise_air", mic.name, cond, "success_rate", successes / n);
        r.add("noise_air", mic.name, cond, "mean_correlation", corr_sum / n);
    }

    // Electric track: every pipeline rerun per level and hashed.
    const InjectionConfig icfg = injection_config(spec, mic);
    const EavesdropConfig ecfg;
    const PowerlineConfig pcfg = powerline_config(spec, mic);
    struct Hashes {
        std::uint64_t injection = fnv1a(""), eavesdrop = fnv1a(""), powerline = fnv1a("");
        int correct = 0, digits = 0;
    };
    const auto run = [&](const AcousticEnvironment& env) {
        Hashes h;
        for (size_t i = 0; i < corpus.size(); ++i) {
            const AudioBuffer& a = corpus[i].audio;
            const std::uint64_t seed = derive_seed(spec.seed, i);
            h.injection = hash_samples(inject_once(a, icfg, seed, env).recorded.samples, h.injection);
            h.eavesdrop = hash_samples(eavesdrop_once(a, ecfg, spec.eavesdrop_k, env).recovered.samples, h.eavesdrop);
            const LeakTrial t = leak_once(a, pcfg, 1.0, seed, env);
            h.powerline = hash_samples(t.cleaned.samples, h.powerline);
            if (model && corpus[i].digit >= 0) {
                const int guess = predict(*model, featurize(t.cleaned)).digit;
                h.powerline = fnv1a(std::to_string(guess), h.powerline);
                h.correct += guess == corpus[i].digit;
                ++h.digits;
            }
        }
        return h;
    };
    const Hashes quiet = run({});
    for (double level : spec.acoustic_noise_levels) {
        const std::string cond = "noise_db=" + text::format_double(level);
        const Hashes h = run({level});
        r.add("noise_electric", mic.name, cond, "injection_identical", h.injection == quiet.injection);
        r.add("noise_electric", mic.name, cond, "eavesdrop_identical", h.eavesdrop == quiet.eavesdrop);
        r.add("noise_electric", mic.name, cond, "powerline_identical", h.powerline == quiet.powerline);
        if (h.digits > 0)
            r.add("noise_electric", mic.name, cond, "powerline_accuracy", static_cast<double>(h.correct) / h.digits);
    }
    return r;
}

Report run_experiment(const ExperimentSpec& spec)
{
    spec.validate();
    std::vector<Utterance> corpus = resolve_corpus(spec.corpus);
    if (spec.max_utterances > 0 && static_cast<int>(corpus.size()) > spec.max_utterances)
        corpus.resize(static_cast<size_t>(spec.max_utterances));
    const std::vector<DeviceProfile> devices = resolve_devices(spec);

    const auto need_model = [&] {
        require(!spec.model.empty(), std::string(to_string(spec.kind)) + " needs a model checkpoint (model = ...)");
        return load_checkpoint(spec.model);
    };
    switch (spec.kind) {
    case ExperimentKind::injection_eval: return run_injection_eval(spec, corpus, devices);
    case ExperimentKind::eavesdrop_eval: return run_eavesdrop_eval(spec, corpus, devices);
    case ExperimentKind::powerline_eval: return run_powerline_eval(spec, corpus, devices, need_model());
    case ExperimentKind::volume_sweep: return volume_sweep(spec, corpus, devices, need_model());
    case ExperimentKind::noise_sweep: {
        if (spec.model.empty())
            return noise_sweep(spec, corpus, devices, nullptr);
        const DigitModel m = load_checkpoint(spec.model);
        return noise_sweep(spec, corpus, devices, &m);
    }
    }
    fail(Errc::invalid_argument, "unhandled experiment kind");
}

// ---------------------------------------------------------------------------
// Training data
// ---------------------------------------------------------------------------

std::vector<LabeledFeature> clean_features(const std::vector<Utterance>& corpus)
{
    std::vector<LabeledFeature> out;
    for (const auto& u : corpus)
        if (u.digit >= 0)
            out.push_back({featurize(u.audio), u.digit});
    return out;
}

std::vector<LabeledFeature> channel_features(const std::vector<Utterance>& corpus,
                                             const std::vector<DeviceProfile>& devices, std::uint64_t seed,
                                             int noiseless_every)
{
    require_devices(devices);
    require(noiseless_every >= 0, "noiseless_every must be >= 0");
    std::vector<LabeledFeature> out;
    size_t k = 0;
    for (size_t i = 0; i < corpus.size(); ++i) {
        const Utterance& u = corpus[i];
        if (u.digit < 0)
            continue;
        PowerlineConfig cfg = powerline_config_for(devices[k % devices.size()]);
        if (noiseless_every > 0 && k % static_cast<size_t>(noiseless_every) == static_cast<size_t>(noiseless_every - 1))
            cfg.noise.enabled = false;
        ++k;
        const LeakTrial t = leak_once(u.audio, cfg, 1.0, derive_seed(seed, i));
        out.push_back({featurize(t.cleaned), u.digit});
    }
    return out;
}

} // namespace powerleak
