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

#include "powerleak/channel.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <numbers>

#include "powerleak/random.hpp"

namespace powerleak {

using Eigen::Index;
using Eigen::VectorXd;

namespace {

double peak_abs(const VectorXd& x)
{
    return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
}

double variance(const VectorXd& x)
{
    if (x.size() == 0)
        return 0;
    return (x.array() - x.mean()).square().mean();
}

} // namespace

// ---------------------------------------------------------------------------
// ADC
// ---------------------------------------------------------------------------

AdcRange auto_range(const VectorXd& values)
{
    require(values.size() > 0, "cannot auto-range an empty trace");
    const double lo = values.minCoeff();
    const double hi = values.maxCoeff();
    double pad = 0.1 * (hi - lo);
    if (!(pad > 0))
        pad = std::max(0.1 * std::abs(lo), 1e-9);
    return {lo - pad, hi + pad};
}

AdcOutput adc_convert(const VectorXd& values, double in_rate, double rate, int bits, AdcRange range)
{
    require(bits >= 1 && bits <= 24, "ADC resolution must be 1..24 bits");
    require(range.hi > range.lo, "ADC range must have positive width");

    AdcOutput out;
    out.values = sample_at_rate(values, in_rate, rate);
    const double levels = std::ldexp(1.0, bits);
    const double step = (range.hi - range.lo) / levels;
    for (Index i = 0; i < out.values.size(); ++i) {
        double code = std::floor((out.values[i] - range.lo) / step);
        if (code < 0 || code > levels - 1) {
            ++out.clipped;
            code = std::clamp(code, 0.0, levels - 1);
        }
        out.values[i] = range.lo + (code + 0.5) * step;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Injection
// ---------------------------------------------------------------------------

void InjectionConfig::validate() const
{
    require(k > 0, "injection k must be positive");
    require(dc_offset_in > 0, "injection DC offset must be positive");
    require(capacitor_cutoff > 0 && capacitor_cutoff < device.f_s / 2,
            "capacitor cutoff must lie below the device Nyquist frequency");
    require(dac_bits >= 1 && dac_bits <= 24, "DAC resolution must be 1..24 bits");
    require(dac_full_scale > dc_offset_in, "DAC full scale must exceed the DC offset");
    require(generator_noise_v >= 0, "generator noise must be non-negative");
    require(analog_rate > 2 * capacitor_cutoff, "analog simulation rate too low for the capacitor cutoff");
}

VoltageTrace modulate_injection(const AudioBuffer& audio, const InjectionConfig& cfg)
{
    cfg.validate();
    const double peak = peak_abs(audio.samples);
    require(peak <= 1.0 + 1e-12, "injected audio must lie in [-1, 1]");
    if (cfg.k * peak >= cfg.dc_offset_in)
        fail(Errc::negative_voltage, "k * max|x| >= DC offset; the microphone wire would go non-positive");
    return VoltageTrace((cfg.k * audio.samples.array() + cfg.dc_offset_in).matrix(), audio.rate);
}

VoltageTrace drive_dac(const VoltageTrace& trace, const InjectionConfig& cfg, std::uint64_t seed)
{
    cfg.validate();
    require(cfg.analog_rate >= trace.rate, "analog rate must not be below the DAC update rate");

    const double levels = std::ldexp(1.0, cfg.dac_bits);
    const double step = cfg.dac_full_scale / levels;
    VectorXd held(trace.size());
    for (Index i = 0; i < trace.size(); ++i) {
        const double code = std::clamp(std::floor(trace.values[i] / step), 0.0, levels - 1);
        held[i] = (code + 0.5) * step;
    }

    const auto n = static_cast<Index>(std::floor(static_cast<double>(trace.size()) * cfg.analog_rate / trace.rate));
    VectorXd analog(n);
    const double ratio = trace.rate / cfg.analog_rate;
    for (Index j = 0; j < n; ++j) {
        // each code is held for one update period centred on its sample time,
        // so the hold adds no group delay
        const auto src = std::min<Index>(trace.size() - 1, static_cast<Index>(std::floor(j * ratio + 0.5)));
        analog[j] = held[src];
    }
    if (cfg.generator_noise_v > 0)
        analog += cfg.generator_noise_v * gaussian_noise(n, seed);
    return VoltageTrace(std::move(analog), cfg.analog_rate);
}

VoltageTrace capacitor_smooth(const VoltageTrace& trace, double cutoff)
{
    require(cutoff > 0 && cutoff < trace.rate / 2, "capacitor cutoff must lie below Nyquist");
    const double a = std::exp(-2 * std::numbers::pi * cutoff / trace.rate);
    VectorXd y(trace.size());
    double state = trace.size() > 0 ? trace.values[0] : 0.0; // capacitor starts charged
    for (Index i = 0; i < trace.size(); ++i) {
        state = a * state + (1 - a) * trace.values[i];
        y[i] = state;
    }
    return VoltageTrace(std::move(y), trace.rate);
}

AudioBuffer phone_record_injected(const VoltageTrace& trace, const InjectionConfig& cfg)
{
    cfg.validate();
    require(trace.size() == 0 || trace.values.minCoeff() > 0, "microphone wire voltage must stay positive");
    const VectorXd audio = (trace.values.array() - cfg.dc_offset_in) / cfg.k;
    VectorXd recorded = sample_at_rate(audio, trace.rate, cfg.device.f_s);
    recorded = recorded.cwiseMax(-1.0).cwiseMin(1.0);
    return AudioBuffer(std::move(recorded), cfg.device.f_s);
}

// ---------------------------------------------------------------------------
// Eavesdropping
// ---------------------------------------------------------------------------

void EavesdropConfig::validate() const
{
    require(dc_offset_out > 0, "eavesdrop DC offset must be positive");
    require(adc_rate > 0, "eavesdrop ADC rate must be positive");
    require(adc_bits >= 8 && adc_bits <= 16, "eavesdrop ADC resolution must be 8..16 bits");
    require(adc_range > 0, "eavesdrop ADC range must be positive");
}

VoltageTrace speaker_wire_voltage(const AudioBuffer& audio, const EavesdropConfig& cfg, double k)
{
    cfg.validate();
    require(k > 0, "speaker wire gain must be positive");
    const double peak = peak_abs(audio.samples);
    require(peak <= 1.0 + 1e-12, "played audio must lie in [-1, 1]");
    if (k * peak >= cfg.dc_offset_out)
        fail(Errc::negative_voltage, "k * max|x| >= output DC offset; ADC input would go non-positive");
    return VoltageTrace((k * audio.samples.array() + cfg.dc_offset_out).matrix(), audio.rate);
}

AudioBuffer demodulate_eavesdrop(const VoltageTrace& trace, const EavesdropConfig& cfg)
{
    cfg.validate();
    require(trace.size() > 0, "empty trace");
    if (trace.values.maxCoeff() == trace.values.minCoeff())
        fail(Errc::degenerate_trace, "constant speaker-wire trace carries no audio");
    const VectorXd centred = trace.values.array() - cfg.dc_offset_out;
    const double k = peak_abs(centred);
    if (!(k > 0))
        fail(Errc::degenerate_trace, "speaker-wire trace never leaves the DC offset");
    return AudioBuffer(centred / k, trace.rate);
}

// ---------------------------------------------------------------------------
// Power line
// ---------------------------------------------------------------------------

void NoiseSynthSpec::validate(double trace_duration) const
{
    require(std::isfinite(firmware_noise_floor), "noise SNR target must be finite");
    require(!absolute_rms || *absolute_rms >= 0, "absolute noise rms must be non-negative");
    for (const auto& b : touch_bursts) {
        require(std::isfinite(b.gain_db), "touch burst gain must be finite");
        require(b.start >= 0 && b.duration > 0 && b.start + b.duration <= trace_duration + 1e-9,
                "touch burst must lie inside the trace");
    }
}

void PowerlineConfig::validate() const
{
    require(speaker_resistance > 0, "speaker resistance must be positive");
    require(amplitude_gain > 0, "amplitude gain must be positive");
    require(supply_voltage > 0, "supply voltage must be positive");
    require(idle_current >= 0, "idle current must be non-negative");
    require(adc_rate > 0, "ADC rate must be positive");
    require(adc_bits >= 1 && adc_bits <= 24, "ADC resolution must be 1..24 bits");
}

PowerlineConfig powerline_config_for(const DeviceProfile& device)
{
    PowerlineConfig cfg;
    cfg.noise.firmware_noise_floor = device.leaked_snr_db;
    return cfg;
}

PowerTrace loudspeaker_power(const AudioBuffer& audio, const PowerlineConfig& cfg, double volume)
{
    cfg.validate();
    require(volume > 0 && volume <= 1, "volume must lie in (0, 1]");
    const double drive = cfg.amplitude_gain * volume;
    return PowerTrace((drive * audio.samples.array()).square().matrix() * cfg.speaker_resistance, audio.rate);
}

VectorXd shaped_noise(Index n, NoiseShape shape, std::uint64_t seed)
{
    require(n >= 0, "negative noise length");
    if (n == 0)
        return VectorXd();
    VectorXd out;
    if (shape == NoiseShape::white) {
        out = gaussian_noise(n, seed);
    } else {
        Index padded = 1;
        while (padded < n)
            padded *= 2;
        const VectorXd white = gaussian_noise(padded, seed);
        std::vector<double> time(white.data(), white.data() + padded);
        std::vector<std::complex<double>> freq;
        Eigen::FFT<double> fft;
        fft.fwd(freq, time);
        freq[0] = 0;
        for (Index k = 1; k <= padded / 2; ++k) {
            const double g = 1.0 / std::sqrt(static_cast<double>(k));
            freq[static_cast<std::size_t>(k)] *= g;
            if (k != padded - k)
                freq[static_cast<std::size_t>(padded - k)] *= g;
        }
        fft.inv(time, freq);
        out = Eigen::Map<const VectorXd>(time.data(), n);
        out.array() -= out.mean();
    }
    const double r = rms(out);
    return r > 0 ? VectorXd(out / r) : out;
}

VectorXd CurrentComponents::total() const
{
    return (leak.values + noise.values + bursts.values).array() + idle;
}

CurrentComponents current_components(const AudioBuffer& audio, const PowerlineConfig& cfg, double volume,
                                     std::uint64_t seed)
{
    const PowerTrace power = loudspeaker_power(audio, cfg, volume);
    const VectorXd leak = sample_at_rate(power.values / cfg.supply_voltage, power.rate, cfg.adc_rate);
    const Index n = leak.size();
    const double duration = static_cast<double>(n) / cfg.adc_rate;
    cfg.noise.validate(duration);

    CurrentComponents c;
    c.leak = CurrentTrace(leak, cfg.adc_rate);
    c.idle = cfg.idle_current;
    c.noise = CurrentTrace(VectorXd::Zero(n), cfg.adc_rate);
    c.bursts = CurrentTrace(VectorXd::Zero(n), cfg.adc_rate);
    if (!cfg.noise.enabled)
        return c;

    if (cfg.noise.absolute_rms) {
        c.noise_rms = *cfg.noise.absolute_rms;
    } else {
        // The leak scales with volume^2, so its spread at full volume follows
        // directly from the clip.
        double leak_std = std::sqrt(variance(leak)) / (volume * volume);
        if (!(leak_std > 0)) {
            // Silent clip: calibrate against a nominal programme, Gaussian
            // audio at 0.1 rms, whose squared value has std sqrt(2) * 0.01.
            const double a = cfg.amplitude_gain;
            leak_std = a * a * cfg.speaker_resistance / cfg.supply_voltage * std::sqrt(2.0) * 0.01;
        }
        c.noise_rms = leak_std / std::pow(10.0, cfg.noise.firmware_noise_floor / 20.0);
    }
    c.noise.values = c.noise_rms * shaped_noise(n, cfg.noise.spectral_shape, seed);

    for (std::size_t i = 0; i < cfg.noise.touch_bursts.size(); ++i) {
        const TouchBurst& b = cfg.noise.touch_bursts[i];
        const auto begin = std::min<Index>(n, static_cast<Index>(std::llround(b.start * cfg.adc_rate)));
        const auto end = std::min<Index>(n, static_cast<Index>(std::llround((b.start + b.duration) * cfg.adc_rate)));
        if (end <= begin)
            continue;
        const VectorXd burst = gaussian_noise(end - begin, derive_seed(seed, 0xB0u + i));
        const double amp = c.noise_rms * std::pow(10.0, b.gain_db / 20.0);
        const VectorXd env = hann_window(end - begin);
        // Hann-enveloped Gaussian noise has mean square 3/8 of the unenveloped.
        c.bursts.values.segment(begin, end - begin) += amp * std::sqrt(8.0 / 3.0) * burst.cwiseProduct(env);
    }
    return c;
}

CurrentTrace synthesize_current_trace(const AudioBuffer& audio, const PowerlineConfig& cfg, double volume,
                                      std::uint64_t seed)
{
    const CurrentComponents c = current_components(audio, cfg, volume, seed);
    const VectorXd total = c.total();
    if (total.size() == 0)
        return CurrentTrace(total, cfg.adc_rate);
    AdcOutput out = adc_convert(total, cfg.adc_rate, cfg.adc_rate, cfg.adc_bits, auto_range(total));
    return CurrentTrace(std::move(out.values), cfg.adc_rate);
}

CurrentTrace synthesize_idle_trace(double duration, const PowerlineConfig& cfg, double noise_rms, std::uint64_t seed)
{
    require(duration > 0, "idle duration must be positive");
    PowerlineConfig idle = cfg;
    idle.noise.absolute_rms = noise_rms;
    idle.noise.touch_bursts.clear();
    const auto n = static_cast<Index>(std::llround(duration * cfg.adc_rate));
    return synthesize_current_trace(AudioBuffer(VectorXd::Zero(n), cfg.adc_rate), idle, 1.0, seed);
}

} // namespace powerleak
