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

#include "powerleak/signal.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <array>
#include <numbers>

namespace powerleak {

using Eigen::Index;
using Eigen::VectorXd;

AudioBuffer::AudioBuffer(VectorXd s, double sample_rate) : samples(std::move(s)), rate(sample_rate)
{
    require(rate > 0 && std::isfinite(rate), "sample rate must be positive");
    require(samples.allFinite(), "audio samples must be finite");
}

double snr_db(double signal_power, double noise_power)
{
    if (!(noise_power > 0))
        fail(Errc::zero_noise_power, "noise power must be positive");
    require(signal_power >= 0, "signal power must be non-negative");
    return 10.0 * std::log10(signal_power / noise_power);
}

double segment_snr_db(const AudioBuffer& recording, Segment signal, Segment noise)
{
    const auto in_range = [&](Segment s) {
        return s.begin >= 0 && s.end <= recording.size() && s.length() > 0;
    };
    require(in_range(signal) && in_range(noise), "SNR segments must lie inside the recording");
    const double p_noise = mean_power(recording.samples.segment(noise.begin, noise.length()));
    const double p_total = mean_power(recording.samples.segment(signal.begin, signal.length()));
    // Floor at 1e-3 of the noise power so a signal-free segment reads -30 dB
    // instead of -inf.
    const double p_signal = std::max(p_total - p_noise, 1e-3 * p_noise);
    return snr_db(p_signal, p_noise);
}

double reference_snr_db(const VectorXd& estimate, const VectorXd& reference)
{
    const Index n = std::min(estimate.size(), reference.size());
    require(n > 0, "empty signals");
    const auto e = estimate.head(n);
    const auto r = reference.head(n);
    const double rr = r.squaredNorm();
    require(rr > 0, "reference has no energy");
    const double gain = e.dot(r) / rr;
    const double residual = (e - gain * r).squaredNorm();
    return snr_db(gain * gain * rr, std::max(residual, 1e-300));
}

// ---------------------------------------------------------------------------
// Butterworth cascade
// ---------------------------------------------------------------------------

std::vector<Biquad> design_butterworth(const FilterSpec& spec, double rate)
{
    require(spec.order >= 1, "filter order must be positive");
    if (!(spec.cutoff > 0 && spec.cutoff < rate / 2))
        fail(Errc::invalid_argument, "filter cutoff must lie strictly between 0 and Nyquist");

    const double w0 = 2 * std::numbers::pi * spec.cutoff / rate;
    const double cw = std::cos(w0);
    const double sw = std::sin(w0);
    const bool hp = spec.kind == FilterKind::high_pass;

    std::vector<Biquad> sections;
    for (int k = 0; k < spec.order / 2; ++k) {
        const double psi = std::numbers::pi * (2 * k + 1) / (2.0 * spec.order);
        const double q = 1.0 / (2.0 * std::cos(psi));
        const double alpha = sw / (2 * q);
        const double a0 = 1 + alpha;
        Biquad s;
        if (hp) {
            s.b0 = (1 + cw) / 2 / a0;
            s.b1 = -(1 + cw) / a0;
            s.b2 = s.b0;
        } else {
            s.b0 = (1 - cw) / 2 / a0;
            s.b1 = (1 - cw) / a0;
            s.b2 = s.b0;
        }
        s.a1 = -2 * cw / a0;
        s.a2 = (1 - alpha) / a0;
        sections.push_back(s);
    }
    if (spec.order % 2 == 1) {
        const double kk = std::tan(w0 / 2);
        Biquad s;
        if (hp) {
            s.b0 = 1 / (1 + kk);
            s.b1 = -s.b0;
        } else {
            s.b0 = kk / (1 + kk);
            s.b1 = s.b0;
        }
        s.a1 = (kk - 1) / (kk + 1);
        sections.push_back(s);
    }
    return sections;
}

VectorXd filter_cascade(const std::vector<Biquad>& sections, const VectorXd& x)
{
    VectorXd y = x;
    for (const Biquad& s : sections) {
        double z1 = 0, z2 = 0; // transposed direct form II state
        for (Index i = 0; i < y.size(); ++i) {
            const double in = y[i];
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            y[i] = out;
        }
    }
    return y;
}

AudioBuffer apply_filter(const AudioBuffer& buffer, const FilterSpec& spec)
{
    return AudioBuffer(filter_cascade(design_butterworth(spec, buffer.rate), buffer.samples),
                       buffer.rate);
}

// ---------------------------------------------------------------------------
// Windowed-sinc interpolation
// ---------------------------------------------------------------------------

namespace {

constexpr int kHalfTaps = 32;      // 64-tap kernel
constexpr double kKaiserBeta = 8.0;
constexpr int kTableDensity = 512; // table entries per zero crossing
constexpr double kPassband = 0.95; // fraction of the limiting Nyquist

class SincTable {
public:
    SincTable() : table_(kHalfTaps * kTableDensity + 2)
    {
        const double norm = std::cyl_bessel_i(0.0, kKaiserBeta);
        for (std::size_t i = 0; i < table_.size(); ++i) {
            const double u = static_cast<double>(i) / kTableDensity;
            if (u >= kHalfTaps) {
                table_[i] = 0;
                continue;
            }
            const double r = u / kHalfTaps;
            const double window = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1 - r * r)) / norm;
            const double sinc = u == 0 ? 1.0 : std::sin(std::numbers::pi * u) / (std::numbers::pi * u);
            table_[i] = sinc * window;
        }
    }

    // Kernel value at |u| zero crossings, linearly interpolated.
    double operator()(double u) const
    {
        u = std::abs(u) * kTableDensity;
        const auto i = static_cast<std::size_t>(u);
        if (i + 1 >= table_.size())
            return 0;
        const double frac = u - static_cast<double>(i);
        return table_[i] + frac * (table_[i + 1] - table_[i]);
    }

private:
    std::vector<double> table_;
};

const SincTable& sinc_table()
{
    static const SincTable table;
    return table;
}

// `cutoff` is the kernel bandwidth as a fraction of the input Nyquist.
VectorXd sinc_interpolate(const VectorXd& x, double ratio, Index out_len, double cutoff)
{
    const SincTable& h = sinc_table();
    const double support = kHalfTaps / cutoff;
    VectorXd y(out_len);
    for (Index n = 0; n < out_len; ++n) {
        const double p = static_cast<double>(n) / ratio;
        const Index lo = std::max<Index>(0, static_cast<Index>(std::ceil(p - support)));
        const Index hi = std::min<Index>(x.size() - 1, static_cast<Index>(std::floor(p + support)));
        double acc = 0;
        for (Index k = lo; k <= hi; ++k)
            acc += x[k] * h(cutoff * (p - static_cast<double>(k)));
        y[n] = cutoff * acc;
    }
    return y;
}

Index resampled_length(Index n, double rate, double target_rate)
{
    return static_cast<Index>(std::floor(static_cast<double>(n) * target_rate / rate + 1e-9));
}

} // namespace

AudioBuffer resample(const AudioBuffer& buffer, double target_rate)
{
    require(target_rate > 0 && std::isfinite(target_rate), "target rate must be positive");
    if (target_rate == buffer.rate)
        return buffer;
    const double ratio = target_rate / buffer.rate;
    const double cutoff = kPassband * std::min(1.0, ratio);
    return AudioBuffer(
        sinc_interpolate(buffer.samples, ratio, resampled_length(buffer.size(), buffer.rate, target_rate), cutoff),
        target_rate);
}

VectorXd sample_at_rate(const VectorXd& x, double rate, double target_rate)
{
    require(rate > 0 && target_rate > 0, "rates must be positive");
    if (rate == target_rate)
        return x;
    return sinc_interpolate(x, target_rate / rate, resampled_length(x.size(), rate, target_rate), kPassband);
}

// ---------------------------------------------------------------------------
// STFT
// ---------------------------------------------------------------------------

void StftParams::validate() const
{
    require(hop > 0 && hop <= window_len && window_len <= fft_len,
            "STFT geometry requires 0 < hop <= window_len <= fft_len");
}

VectorXd hann_window(Index n)
{
    VectorXd w(n);
    for (Index i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    return w;
}

ComplexSpectrogram stft_complex(const AudioBuffer& buffer, const StftParams& params)
{
    params.validate();
    if (buffer.size() < params.window_len)
        fail(Errc::too_short, "buffer is shorter than the STFT window");

    const Index frames = stft_frame_count(buffer.size(), params);
    const VectorXd window = hann_window(params.window_len);

    ComplexSpectrogram out;
    out.params = params;
    out.rate = buffer.rate;
    out.signal_length = buffer.size();
    out.bins.resize(frames, params.bins());

    Eigen::FFT<double> fft;
    std::vector<double> frame(static_cast<std::size_t>(params.fft_len));
    std::vector<std::complex<double>> spectrum;
    for (Index f = 0; f < frames; ++f) {
        std::fill(frame.begin(), frame.end(), 0.0);
        const Index start = f * params.hop;
        for (Index i = 0; i < params.window_len; ++i)
            frame[static_cast<std::size_t>(i)] = buffer.samples[start + i] * window[i];
        fft.fwd(spectrum, frame);
        for (Index k = 0; k < params.bins(); ++k)
            out.bins(f, k) = spectrum[static_cast<std::size_t>(k)];
    }
    return out;
}

Spectrogram magnitude(const ComplexSpectrogram& spec)
{
    Spectrogram s;
    s.magnitudes = spec.bins.cwiseAbs();
    s.frame_hop = static_cast<double>(spec.params.hop) / spec.rate;
    s.bin_width = spec.rate / static_cast<double>(spec.params.fft_len);
    s.origin_rate = spec.rate;
    return s;
}

Spectrogram stft(const AudioBuffer& buffer, Index window_len, Index hop, Index fft_len)
{
    return magnitude(stft_complex(buffer, StftParams{window_len, hop, fft_len}));
}

AudioBuffer istft(const ComplexSpectrogram& spec)
{
    const StftParams& p = spec.params;
    p.validate();
    if (spec.bins.cols() != p.bins() || spec.signal_length < p.window_len ||
        spec.frames() != stft_frame_count(spec.signal_length, p))
        fail(Errc::geometry_mismatch, "spectrogram does not match its recorded STFT geometry");

    const VectorXd window = hann_window(p.window_len);
    VectorXd acc = VectorXd::Zero(spec.signal_length);
    VectorXd norm = VectorXd::Zero(spec.signal_length);

    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> full(static_cast<std::size_t>(p.fft_len));
    std::vector<double> frame;
    for (Index f = 0; f < spec.frames(); ++f) {
        // Rebuild the Hermitian-symmetric spectrum of a real frame.
        for (Index k = 0; k < p.bins(); ++k)
            full[static_cast<std::size_t>(k)] = spec.bins(f, k);
        for (Index k = p.bins(); k < p.fft_len; ++k)
            full[static_cast<std::size_t>(k)] = std::conj(spec.bins(f, p.fft_len - k));
        fft.inv(frame, full);
        const Index start = f * p.hop;
        for (Index i = 0; i < p.window_len; ++i) {
            acc[start + i] += window[i] * frame[static_cast<std::size_t>(i)];
            norm[start + i] += window[i] * window[i];
        }
    }
    for (Index i = 0; i < acc.size(); ++i)
        acc[i] = norm[i] > 1e-10 ? acc[i] / norm[i] : 0.0;
    return AudioBuffer(std::move(acc), spec.rate);
}

} // namespace powerleak
