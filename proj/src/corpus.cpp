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

#include "powerleak/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "powerleak/config_text.hpp"
#include "powerleak/random.hpp"
#include "powerleak/wav.hpp"

namespace powerleak {

using Eigen::Index;
using Eigen::VectorXd;

std::string Utterance::file_name() const
{
    const std::string head = digit >= 0 ? std::to_string(digit) : std::string("cmd");
    return head + "_" + speaker + "_" + std::to_string(index) + ".wav";
}

std::vector<Utterance> load_corpus(const std::filesystem::path& dir)
{
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir))
        fail(Errc::missing_file, dir.string() + ": not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && text::lower(e.path().extension().string()) == ".wav")
            files.push_back(e.path());
    if (files.empty())
        fail(Errc::empty_dataset, dir.string() + ": no .wav files");
    std::sort(files.begin(), files.end());

    std::vector<Utterance> out;
    out.reserve(files.size());
    for (const auto& f : files) {
        Utterance u;
        u.audio = load_wav(f);
        const std::string stem = f.stem().string();
        const auto parts = text::split_list(stem, '_');
        u.speaker = stem;
        if (parts.size() == 3) {
            u.speaker = parts[1];
            try {
                u.index = static_cast<int>(text::to_int(parts[2], "index"));
            } catch (const Error&) {
                u.index = 0;
            }
            if (parts[0].size() == 1 && parts[0][0] >= '0' && parts[0][0] <= '9') {
                u.digit = parts[0][0] - '0';
                u.text = std::string(kDigitWords[u.digit]);
            }
        }
        out.push_back(std::move(u));
    }
    return out;
}

void write_corpus(const std::vector<Utterance>& corpus, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        fail(Errc::unwritable_path, dir.string() + ": " + ec.message());
    for (const auto& u : corpus)
        save_wav(u.audio, dir / u.file_name(), WavDepth::pcm16);
}

SpeakerTraits make_speaker(std::string name, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SpeakerTraits s;
    s.name = std::move(name);
    s.female = u(rng) < 0.5;
    const auto between = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    if (s.female) {
        s.f0 = between(170, 240);
        s.formant_scale = between(1.08, 1.22);
        s.breathiness = between(0.1, 0.35);
    } else {
        s.f0 = between(95, 140);
        s.formant_scale = between(0.9, 1.05);
        s.breathiness = between(0.02, 0.2);
    }
    s.rate = between(0.8, 1.25);
    s.pitch_range = between(0.08, 0.25);
    return s;
}

namespace {

enum class Kind { vowel, glide, nasal, fricative, voiced_fricative, closure, voice_bar, burst, aspiration };

struct Phone {
    std::string_view sym;
    Kind kind;
    double f1, f2, f3; // adult male targets, Hz; zero = take from neighbours
    double dur_ms;
    double fric_hz = 0, fric_bw = 0, fric_amp = 0;
};

// clang-format off
constexpr Phone kPhones[] = {
    {"i",   Kind::vowel, 270, 2290, 3010, 110},
    {"I",   Kind::vowel, 390, 1990, 2550, 90},
    {"e",   Kind::vowel, 480, 2100, 2600, 110},
    {"E",   Kind::vowel, 530, 1840, 2480, 100},
    {"@",   Kind::vowel, 500, 1500, 2500, 60},
    {"^",   Kind::vowel, 640, 1190, 2390, 120},
    {"a",   Kind::vowel, 730, 1090, 2440, 130},
    {"O",   Kind::vowel, 570,  840, 2410, 150},
    {"o",   Kind::vowel, 500,  900, 2400, 100},
    {"U",   Kind::vowel, 440, 1020, 2240, 90},
    {"u",   Kind::vowel, 300,  870, 2240, 180},
    {"r",   Kind::glide, 310, 1060, 1380, 70},
    {"w",   Kind::glide, 290,  610, 2150, 70},
    {"l",   Kind::glide, 360, 1000, 2700, 70},
    {"j",   Kind::glide, 260, 2070, 3020, 60},
    {"n",   Kind::nasal, 250, 1700, 2600, 90},
    {"m",   Kind::nasal, 250, 1100, 2500, 90},
    {"s",   Kind::fricative,        0, 0, 0, 130, 5500, 2500, 0.35},
    {"z",   Kind::voiced_fricative, 0, 0, 0, 90,  5000, 2500, 0.20},
    {"f",   Kind::fricative,        0, 0, 0, 120, 4500, 4000, 0.12},
    {"th",  Kind::fricative,        0, 0, 0, 120, 5000, 4500, 0.10},
    {"v",   Kind::voiced_fricative, 0, 0, 0, 70,  4000, 4000, 0.08},
    {"h",   Kind::aspiration,       0, 0, 0, 60},
    {"tcl", Kind::closure,          0, 0, 0, 60},
    {"kcl", Kind::closure,          0, 0, 0, 60},
    {"pcl", Kind::closure,          0, 0, 0, 60},
    {"dcl", Kind::voice_bar,        0, 0, 0, 50},
    {"t",   Kind::burst,            0, 0, 0, 15,  4200, 2000, 0.50},
    {"k",   Kind::burst,            0, 0, 0, 20,  2200, 1000, 0.45},
    {"p",   Kind::burst,            0, 0, 0, 12,  1200, 2000, 0.30},
    {"d",   Kind::burst,            0, 0, 0, 12,  3800, 2000, 0.35},
};
// clang-format on

struct Word {
    std::string_view word;
    std::vector<std::pair<std::string_view, double>> phones; // duration scale per phone
};

const std::vector<Word>& lexicon()
{
    static const std::vector<Word> words = {
        {"zero", {{"z", 1}, {"I", 0.8}, {"r", 1}, {"o", 1.2}, {"U", 1.2}}},
        {"one", {{"w", 1.1}, {"^", 1.3}, {"n", 1.8}}},
        {"two", {{"tcl", 1}, {"t", 1}, {"h", 1}, {"u", 1.5}}},
        {"three", {{"th", 1}, {"r", 0.9}, {"i", 2.2}}},
        {"four", {{"f", 1.1}, {"O", 1.3}, {"r", 2.0}}},
        {"five", {{"f", 1}, {"a", 1.3}, {"I", 1.2}, {"v", 1.3}}},
        {"six", {{"s", 1.1}, {"I", 1.2}, {"kcl", 1}, {"k", 1}, {"s", 1.5}}},
        {"seven", {{"s", 1.1}, {"E", 1.2}, {"v", 1}, {"@", 1.1}, {"n", 1.6}}},
        {"eight", {{"e", 1.4}, {"I", 1.2}, {"tcl", 1}, {"t", 2.5}}},
        {"nine", {{"n", 1}, {"a", 1.3}, {"I", 1.2}, {"n", 1.8}}},
        {"hey", {{"h", 1}, {"e", 1.2}, {"I", 1.2}}},
        {"call", {{"kcl", 0.8}, {"k", 1}, {"h", 0.8}, {"O", 1.2}, {"l", 1.6}}},
        {"open", {{"o", 1.2}, {"U", 0.8}, {"pcl", 1}, {"p", 1}, {"@", 1}, {"n", 1.4}}},
        {"play", {{"pcl", 0.8}, {"p", 1}, {"l", 1}, {"e", 1.3}, {"I", 1.2}}},
        {"stop", {{"s", 1}, {"tcl", 0.8}, {"t", 1}, {"a", 1.2}, {"pcl", 1}, {"p", 1.5}}},
        {"music", {{"m", 1}, {"j", 1}, {"u", 1}, {"z", 1}, {"I", 1}, {"kcl", 1}, {"k", 1.5}}},
        {"home", {{"h", 1}, {"o", 1.2}, {"U", 0.8}, {"m", 1.6}}},
        {"door", {{"dcl", 1}, {"d", 1}, {"O", 1.3}, {"r", 1.8}}},
        {"set", {{"s", 1}, {"E", 1.2}, {"tcl", 1}, {"t", 2}}},
        {"alarm", {{"@", 1}, {"l", 1}, {"a", 1.4}, {"r", 1}, {"m", 1.6}}},
        {"lights", {{"l", 1}, {"a", 1.2}, {"I", 1}, {"tcl", 1}, {"t", 1}, {"s", 1.2}}},
        {"on", {{"a", 1.4}, {"n", 1.6}}},
        {"off", {{"O", 1.4}, {"f", 1.4}}},
        {"mom", {{"m", 1}, {"a", 1.4}, {"m", 1.6}}},
    };
    return words;
}

const Phone& phone(std::string_view sym)
{
    for (const auto& p : kPhones)
        if (p.sym == sym)
            return p;
    fail(Errc::invalid_argument, "unknown phone '" + std::string(sym) + "'");
}

const Word& word_entry(std::string_view w)
{
    for (const auto& e : lexicon())
        if (e.word == w)
            return e;
    fail(Errc::invalid_argument, "word '" + std::string(w) + "' is not in the synthesiser lexicon");
}

// Piecewise-linear control track sampled per output sample.
class Track {
public:
    void add(double t, double v) { points_.emplace_back(t, v); }

    double at(double t)
    {
        if (points_.empty())
            return 0;
        while (cursor_ + 1 < points_.size() && points_[cursor_ + 1].first <= t)
            ++cursor_;
        if (t <= points_.front().first)
            return points_.front().second;
        if (cursor_ + 1 >= points_.size())
            return points_.back().second;
        const auto [t0, v0] = points_[cursor_];
        const auto [t1, v1] = points_[cursor_ + 1];
        return t1 > t0 ? v0 + (v1 - v0) * (t - t0) / (t1 - t0) : v1;
    }

private:
    std::vector<std::pair<double, double>> points_;
    size_t cursor_ = 0;
};

// Two-pole resonator with unity gain at DC.
struct Resonator {
    double y1 = 0, y2 = 0;

    double step(double x, double f, double bw, double rate)
    {
        const double c = -std::exp(-2 * std::numbers::pi * bw / rate);
        const double b = 2 * std::exp(-std::numbers::pi * bw / rate) * std::cos(2 * std::numbers::pi * f / rate);
        const double a = 1 - b - c;
        const double y = a * x + b * y1 + c * y2;
        y2 = y1;
        y1 = y;
        return y;
    }
};

// Constant-peak-gain band-pass biquad (direct form I).
struct BandPass {
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;

    double step(double x, double f, double bw, double rate)
    {
        const double w = 2 * std::numbers::pi * f / rate;
        const double alpha = std::sin(w) / (2 * std::max(f / bw, 0.3));
        const double a0 = 1 + alpha;
        const double y = (alpha * x - alpha * x2 + 2 * std::cos(w) * y1 - (1 - alpha) * y2) / a0;
        x2 = x1;
        x1 = x;
        y2 = y1;
        y1 = y;
        return y;
    }
};

struct Amplitudes {
    double voice = 0, aspiration = 0, frication = 0;
};

Amplitudes amplitudes(const Phone& p)
{
    switch (p.kind) {
    case Kind::vowel: return {1.0, 0, 0};
    case Kind::glide: return {0.6, 0, 0};
    case Kind::nasal: return {0.35, 0, 0};
    case Kind::fricative: return {0, 0.02, p.fric_amp};
    case Kind::voiced_fricative: return {0.25, 0, p.fric_amp};
    case Kind::closure: return {0, 0, 0};
    case Kind::voice_bar: return {0.08, 0, 0};
    case Kind::burst: return {0, 0.1, p.fric_amp};
    case Kind::aspiration: return {0, 0.3, 0};
    }
    return {};
}

bool has_formants(const Phone& p)
{
    return p.f1 > 0;
}

} // namespace

AudioBuffer synthesize_word(std::string_view word, const SpeakerTraits& speaker, std::uint64_t seed, double rate)
{
    require(rate >= 8000, "synthesis rate must be at least 8 kHz");
    const Word& entry = word_entry(word);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);

    const double tempo = speaker.rate * (0.9 + 0.2 * u(rng));
    const double f0 = speaker.f0 * (0.92 + 0.16 * u(rng));
    const double scale = speaker.formant_scale * (0.97 + 0.06 * u(rng));

    struct Seg {
        const Phone* p;
        double start, dur;
        double f[3];
    };
    std::vector<Seg> segs;
    double t = 0;
    for (const auto& [sym, stretch] : entry.phones) {
        const Phone& p = phone(sym);
        const double dur = p.dur_ms * 1e-3 * stretch * (0.85 + 0.3 * u(rng)) / tempo;
        Seg s{&p, t, dur, {p.f1, p.f2, p.f3}};
        for (double& f : s.f)
            f *= scale * (1 + 0.04 * g(rng));
        segs.push_back(s);
        t += dur;
    }
    const double total = t;
    // consonants without their own formants borrow the next voiced target
    for (size_t i = 0; i < segs.size(); ++i) {
        if (has_formants(*segs[i].p))
            continue;
        const Seg* src = nullptr;
        for (size_t j = i + 1; j < segs.size() && !src; ++j)
            if (has_formants(*segs[j].p))
                src = &segs[j];
        for (size_t j = i; j-- > 0 && !src;)
            if (has_formants(*segs[j].p))
                src = &segs[j];
        const double neutral[3] = {500 * scale, 1500 * scale, 2500 * scale};
        for (int k = 0; k < 3; ++k)
            segs[i].f[k] = src ? src->f[k] : neutral[k];
    }

    Track f1, f2, f3, av, ah, af, fh, fb;
    for (const auto& s : segs) {
        const double edge = std::min(0.3 * s.dur, 0.04);
        f1.add(s.start + edge, s.f[0]);
        f1.add(s.start + s.dur - edge, s.f[0]);
        f2.add(s.start + edge, s.f[1]);
        f2.add(s.start + s.dur - edge, s.f[1]);
        f3.add(s.start + edge, s.f[2]);
        f3.add(s.start + s.dur - edge, s.f[2]);

        const Amplitudes a = amplitudes(*s.p);
        const double ramp = std::min(0.25 * s.dur, 0.008);
        const double breath = speaker.breathiness * 0.3 * a.voice;
        av.add(s.start + ramp, a.voice);
        av.add(s.start + s.dur - ramp, a.voice);
        ah.add(s.start + ramp, a.aspiration + breath);
        ah.add(s.start + s.dur - ramp, a.aspiration + breath);
        af.add(s.start + ramp, a.frication);
        af.add(s.start + s.dur - ramp, a.frication);
        const double fc = s.p->fric_hz > 0 ? s.p->fric_hz * std::sqrt(scale) : 3000;
        fh.add(s.start, fc);
        fh.add(s.start + s.dur, fc);
        fb.add(s.start, s.p->fric_bw > 0 ? s.p->fric_bw : 2000);
        fb.add(s.start + s.dur, s.p->fric_bw > 0 ? s.p->fric_bw : 2000);
    }

    const auto n = static_cast<Index>(std::ceil(total * rate)) + 1;
    VectorXd out(n);
    const double nyq_limit = 0.45 * rate;
    const double f4 = 3400 * scale;
    const double bw[4] = {60 + 20 * u(rng), 90 + 20 * u(rng), 150, 200};
    // slow pitch wander
    const double wander_hz = 2 + 3 * u(rng), wander_phase = 2 * std::numbers::pi * u(rng);

    Resonator r1, r2, r3, r4;
    BandPass fric;
    double phase = 0;
    for (Index i = 0; i < n; ++i) {
        const double ti = static_cast<double>(i) / rate;
        const double pos = total > 0 ? ti / total : 0;
        const double pitch = f0 * (1 + speaker.pitch_range * (0.5 - pos)) *
                             (1 + 0.02 * std::sin(2 * std::numbers::pi * wander_hz * ti + wander_phase));
        phase += 2 * std::numbers::pi * pitch / rate;
        if (phase > 2 * std::numbers::pi)
            phase -= 2 * std::numbers::pi;

        double voiced = 0;
        const auto harmonics = static_cast<int>(nyq_limit / pitch);
        for (int k = 1; k <= harmonics; ++k)
            voiced += std::sin(k * phase) / k;
        voiced *= 0.5;

        const double a_v = av.at(ti), a_h = ah.at(ti), a_f = af.at(ti);
        double x = a_v * voiced + a_h * g(rng);
        x = r1.step(x, std::min(f1.at(ti), nyq_limit), bw[0], rate);
        x = r2.step(x, std::min(f2.at(ti), nyq_limit), bw[1], rate);
        const double f3i = f3.at(ti);
        if (f3i < nyq_limit)
            x = r3.step(x, f3i, bw[2], rate);
        if (f4 < nyq_limit)
            x = r4.step(x, f4, bw[3], rate);

        const double noise = g(rng);
        const double fric_out = fric.step(noise, std::min(fh.at(ti), nyq_limit), fb.at(ti), rate);
        out[i] = x + a_f * fric_out;
    }
    const double peak = out.cwiseAbs().maxCoeff();
    if (peak > 0)
        out /= peak;
    return AudioBuffer(std::move(out), rate);
}

namespace {

AudioBuffer pad_and_level(const VectorXd& speech, double rate, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto lead = static_cast<Index>((0.05 + 0.2 * u(rng)) * rate);
    const auto trail = static_cast<Index>((0.05 + 0.2 * u(rng)) * rate);
    VectorXd x = VectorXd::Zero(lead + speech.size() + trail);
    x.segment(lead, speech.size()) = speech;
    const double peak_in = x.cwiseAbs().maxCoeff();
    const double level = 0.56 + 0.24 * u(rng);
    if (peak_in > 0)
        x *= level / peak_in;
    x += gaussian_noise(x.size(), rng()) * (level * std::pow(10.0, -45.0 / 20.0));
    return AudioBuffer(std::move(x), rate);
}

} // namespace

AudioBuffer synthesize_digit(int digit, const SpeakerTraits& speaker, std::uint64_t seed, double rate)
{
    require(digit >= 0 && digit <= 9, "digit must lie in 0..9");
    const AudioBuffer w = synthesize_word(kDigitWords[digit], speaker, derive_seed(seed, 0), rate);
    std::mt19937_64 rng(derive_seed(seed, 1));
    return pad_and_level(w.samples, rate, rng);
}

AudioBuffer synthesize_phrase(const std::vector<std::string>& words, const SpeakerTraits& speaker,
                              std::uint64_t seed, double rate)
{
    require(!words.empty(), "phrase needs at least one word");
    std::mt19937_64 rng(derive_seed(seed, 1));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<VectorXd> parts;
    Index total = 0;
    for (size_t i = 0; i < words.size(); ++i) {
        const AudioBuffer w = synthesize_word(words[i], speaker, derive_seed(seed, 10 + i), rate);
        // later words in a phrase are slightly softer
        parts.push_back(w.samples * (1.0 - 0.25 * u(rng)));
        total += parts.back().size();
        if (i + 1 < words.size()) {
            parts.push_back(VectorXd::Zero(static_cast<Index>((0.04 + 0.08 * u(rng)) * rate)));
            total += parts.back().size();
        }
    }
    VectorXd speech(total);
    Index at = 0;
    for (const auto& p : parts) {
        speech.segment(at, p.size()) = p;
        at += p.size();
    }
    return pad_and_level(speech, rate, rng);
}

void SyntheticCorpusSpec::validate() const
{
    require(speakers >= 1 && repetitions >= 1, "corpus needs at least one speaker and one repetition");
    require(rate >= 8000, "corpus rate must be at least 8 kHz");
    require(!speaker_prefix.empty() && speaker_prefix.find('_') == std::string::npos,
            "speaker prefix must be non-empty and contain no '_'");
}

std::vector<Utterance> synthetic_digit_corpus(const SyntheticCorpusSpec& spec)
{
    spec.validate();
    std::vector<Utterance> out;
    out.reserve(static_cast<size_t>(spec.speakers * spec.repetitions * 10));
    for (int s = 0; s < spec.speakers; ++s) {
        const std::string name = spec.speaker_prefix + (s < 10 ? "0" : "") + std::to_string(s);
        const std::uint64_t speaker_seed = derive_seed(spec.seed, static_cast<std::uint64_t>(s));
        const SpeakerTraits traits = make_speaker(name, speaker_seed);
        for (int d = 0; d < 10; ++d) {
            for (int r = 0; r < spec.repetitions; ++r) {
                Utterance u;
                u.audio = synthesize_digit(d, traits, derive_seed(speaker_seed, static_cast<std::uint64_t>(1 + d * 1000 + r)),
                                           spec.rate);
                u.digit = d;
                u.speaker = name;
                u.index = r;
                u.text = std::string(kDigitWords[d]);
                out.push_back(std::move(u));
            }
        }
    }
    return out;
}

std::vector<Utterance> synthetic_command_corpus(int count, std::uint64_t seed, double rate, int speakers)
{
    require(count >= 1 && speakers >= 1, "command corpus needs a positive count and speaker count");
    static const std::vector<std::vector<std::string>> heads = {
        {"hey"}, {"hey", "call"}, {"call"}, {"open"}, {"play"}, {"stop"}, {"set"}, {"hey", "open"}, {"hey", "play"}};
    static const std::vector<std::string> objects = {"music", "door", "home", "alarm", "lights", "mom"};
    static const std::vector<std::string> switches = {"on", "off"};

    std::vector<SpeakerTraits> voices;
    for (int s = 0; s < speakers; ++s)
        voices.push_back(make_speaker("cmd" + std::to_string(s), derive_seed(seed, 1000 + static_cast<std::uint64_t>(s))));

    std::mt19937_64 rng(derive_seed(seed, 1));
    std::vector<Utterance> out;
    for (int i = 0; i < count; ++i) {
        std::vector<std::string> words = heads[rng() % heads.size()];
        if (words.back() == "call") {
            const int n = 2 + static_cast<int>(rng() % 3);
            for (int k = 0; k < n; ++k)
                words.emplace_back(kDigitWords[rng() % 10]);
        } else if (words.back() == "set") {
            words.emplace_back("alarm");
            words.emplace_back(kDigitWords[rng() % 10]);
        } else {
            words.push_back(objects[rng() % objects.size()]);
            if (words.back() == "lights" || words.back() == "music")
                words.push_back(switches[rng() % switches.size()]);
        }
        const SpeakerTraits& v = voices[static_cast<size_t>(i % speakers)];
        Utterance u;
        u.audio = synthesize_phrase(words, v, derive_seed(seed, 100000 + static_cast<std::uint64_t>(i)), rate);
        u.speaker = v.name;
        u.index = i;
        for (const auto& w : words)
            u.text += (u.text.empty() ? "" : " ") + w;
        out.push_back(std::move(u));
    }
    return out;
}

} // namespace powerleak
