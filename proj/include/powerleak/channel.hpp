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

// Electrical channel models for a phone on a charging cable:
//
//  * injection  - attacker voltage on the microphone wire, recorded by the phone
//  * eavesdrop  - speaker-wire voltage read back by the attacker's ADC
//  * power line - loudspeaker power showing up in the charging current
//
// None of these functions takes an acoustic parameter: ambient sound cannot
// reach a wire, and the harness checks that outputs stay bit-identical.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "powerleak/devices.hpp"
#include "powerleak/signal.hpp"

namespace powerleak {

struct Volts {
    static constexpr std::string_view symbol = "V";
};
struct Amperes {
    static constexpr std::string_view symbol = "A";
};
struct Watts {
    static constexpr std::string_view symbol = "W";
};

/// Electrical time series tagged with its unit.
template <typename Unit>
struct Trace {
    using unit = Unit;

    Eigen::VectorXd values;
    double rate = 1.0;

    Trace() = default;
    Trace(Eigen::VectorXd v, double sample_rate) : values(std::move(v)), rate(sample_rate)
    {
        require(rate > 0 && std::isfinite(rate), "trace rate must be positive");
        require(values.allFinite(), "trace values must be finite");
    }

    Eigen::Index size() const { return values.size(); }
    double duration() const { return static_cast<double>(values.size()) / rate; }
};

using VoltageTrace = Trace<Volts>;
using CurrentTrace = Trace<Amperes>;
using PowerTrace = Trace<Watts>;

// ---------------------------------------------------------------------------
// ADC
// ---------------------------------------------------------------------------

struct AdcRange {
    double lo = 0;
    double hi = 1;
};

/// Trace span widened by 10 % of the span on each side.
AdcRange auto_range(const Eigen::VectorXd& values);

struct AdcOutput {
    Eigen::VectorXd values;
    std::size_t clipped = 0;
};

/// Point-samples at `rate` (no anti-alias filter) and applies a mid-rise
/// quantiser with 2^bits levels across `range`. Out-of-range values clip to
/// the outermost level and are counted.
AdcOutput adc_convert(const Eigen::VectorXd& values, double in_rate, double rate, int bits, AdcRange range);

template <typename Unit>
struct AdcResult {
    Trace<Unit> trace;
    std::size_t clipped = 0;
};

template <typename Unit>
AdcResult<Unit> adc_sample(const Trace<Unit>& trace, double rate, int bits, AdcRange range)
{
    AdcOutput out = adc_convert(trace.values, trace.rate, rate, bits, range);
    return {Trace<Unit>(std::move(out.values), rate), out.clipped};
}

/// Single-number range means [0, range] volts (or amperes).
template <typename Unit>
AdcResult<Unit> adc_sample(const Trace<Unit>& trace, double rate, int bits, double range)
{
    return adc_sample(trace, rate, bits, AdcRange{0.0, range});
}

// ---------------------------------------------------------------------------
// Injection over the microphone wire
// ---------------------------------------------------------------------------

struct InjectionConfig {
    double k = 0.1;                  // voltage-range factor
    double dc_offset_in = 1.45;      // volts
    double capacitor_cutoff = 10000; // Hz
    double mic_resistance = 2000;    // ohms; kept for emulation bookkeeping
    DeviceProfile device;

    // Attacker signal generator feeding the cable.
    int dac_bits = 12;
    double dac_full_scale = 3.3;     // volts
    double generator_noise_v = 5e-3; // white output noise, volts rms
    double analog_rate = 192000;     // Hz, simulation rate of the continuous wire

    void validate() const;
};

/// V_i(t) = k * x(t) + dc_offset_in. Throws negative_voltage when
/// k * max|x| >= dc_offset_in.
VoltageTrace modulate_injection(const AudioBuffer& audio, const InjectionConfig& cfg);

/// The attacker DAC: quantises to dac_bits over [0, dac_full_scale], holds
/// each sample for one update period centred on its time (zero-order hold
/// without the half-sample delay) on the analog_rate grid and adds the
/// generator's white noise.
VoltageTrace drive_dac(const VoltageTrace& trace, const InjectionConfig& cfg, std::uint64_t seed);

/// First-order RC low-pass, y[n] = a*y[n-1] + (1-a)*x[n] with
/// a = exp(-2*pi*cutoff/rate); unit DC gain, time constant 1/(2*pi*cutoff).
VoltageTrace capacitor_smooth(const VoltageTrace& trace, double cutoff);

/// The victim phone's view: remove the offset, divide by k, sample at the
/// device rate with an ideal (non-anti-aliased) ADC and clamp to [-1, 1].
AudioBuffer phone_record_injected(const VoltageTrace& trace, const InjectionConfig& cfg);

// ---------------------------------------------------------------------------
// Eavesdropping on the speaker wire
// ---------------------------------------------------------------------------

struct EavesdropConfig {
    double dc_offset_out = 1.5;     // volts, added by the attacker's amplifier
    double adc_rate = 10000;        // Hz
    int adc_bits = 12;
    double adc_range = 3.3;         // volts, ADC input spans [0, adc_range]
    double speaker_resistance = 32; // ohms; kept for emulation bookkeeping

    void validate() const;
};

/// V_o(t) = k * x(t) + dc_offset_out; throws negative_voltage if that can go
/// non-positive.
VoltageTrace speaker_wire_voltage(const AudioBuffer& audio, const EavesdropConfig& cfg, double k);

/// x_e(t) = (V_o(t) - dc_offset_out) / k with k = max|V_o - dc_offset_out|.
/// Throws degenerate_trace for constant traces.
AudioBuffer demodulate_eavesdrop(const VoltageTrace& trace, const EavesdropConfig& cfg);

// ---------------------------------------------------------------------------
// Power-line side channel through a standard cable
// ---------------------------------------------------------------------------

enum class NoiseShape { white, pink };

/// Transient interference, e.g. a finger on the touch screen.
struct TouchBurst {
    double start = 0;    // seconds from trace start
    double duration = 0; // seconds
    double gain_db = 0;  // burst rms relative to the firmware noise rms
};

struct NoiseSynthSpec {
    bool enabled = true;
    double firmware_noise_floor = 5.0; // leaked-signal SNR at full volume, dB
    NoiseShape spectral_shape = NoiseShape::pink;
    std::vector<TouchBurst> touch_bursts;
    /// Fixed firmware-noise rms in amperes. When unset the level is derived
    /// from the SNR target and the clip's own leaked power at volume 1.
    std::optional<double> absolute_rms;

    void validate(double trace_duration) const;
};

struct PowerlineConfig {
    double speaker_resistance = 8;  // ohms
    double amplitude_gain = 0.3;    // drive current amplitude at full scale, amperes
    double supply_voltage = 5;      // volts
    double idle_current = 0.25;     // amperes drawn by the idle phone
    double adc_rate = 8000;         // Hz
    int adc_bits = 12;
    NoiseSynthSpec noise;

    void validate() const;
};

/// Power-line settings for a device: SNR target from its profile.
PowerlineConfig powerline_config_for(const DeviceProfile& device);

/// P_l(t) = (a * volume * x(t))^2 * R. For x = cos(2*pi*f*t) this is
/// (a^2 R / 2)(1 + cos(4*pi*f*t)): the leak sits at twice the audio frequency.
PowerTrace loudspeaker_power(const AudioBuffer& audio, const PowerlineConfig& cfg, double volume);

/// The parts of a charging-current trace on the ADC clock, before
/// quantisation.
struct CurrentComponents {
    CurrentTrace leak;   // P_l / supply_voltage, sampled at adc_rate
    CurrentTrace noise;  // firmware noise
    CurrentTrace bursts; // touch transients
    double idle = 0;     // constant idle draw
    double noise_rms = 0;

    Eigen::VectorXd total() const;
};

CurrentComponents current_components(const AudioBuffer& audio, const PowerlineConfig& cfg, double volume,
                                     std::uint64_t seed);

/// Charging current seen by the attacker: leak + idle + firmware noise +
/// touch bursts, through a 12-bit (by default) auto-ranged ADC at adc_rate.
CurrentTrace synthesize_current_trace(const AudioBuffer& audio, const PowerlineConfig& cfg, double volume,
                                      std::uint64_t seed);

/// A trace of the idle phone (no audio playing) with a fixed noise rms.
CurrentTrace synthesize_idle_trace(double duration, const PowerlineConfig& cfg, double noise_rms,
                                   std::uint64_t seed);

/// Unit-rms noise of the requested spectral shape.
Eigen::VectorXd shaped_noise(Eigen::Index n, NoiseShape shape, std::uint64_t seed);

} // namespace powerleak
