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

// Audio buffers and the DSP primitives every other module builds on:
// Butterworth filtering, windowed-sinc resampling, STFT / ISTFT and SNR.

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <vector>

#include "powerleak/error.hpp"

namespace powerleak {

/// Uniformly sampled, amplitude-normalised audio. Samples are nominally in
/// [-1, 1]; the constructor enforces rate > 0 and finite samples.
struct AudioBuffer {
    Eigen::VectorXd samples;
    double rate = 1.0;

    AudioBuffer() = default;
    AudioBuffer(Eigen::VectorXd s, double sample_rate);

    Eigen::Index size() const { return samples.size(); }
    double duration() const { return static_cast<double>(samples.size()) / rate; }
};

/// Half-open sample range [begin, end).
struct Segment {
    Eigen::Index begin = 0;
    Eigen::Index end = 0;

    Eigen::Index length() const { return end - begin; }
};

// ---------------------------------------------------------------------------
// Metrics. Templated on the Eigen expression so they work on blocks, maps and
// float or double vectors alike.
// ---------------------------------------------------------------------------

template <typename Derived>
typename Derived::Scalar mean_power(const Eigen::MatrixBase<Derived>& x)
{
    using Scalar = typename Derived::Scalar;
    if (x.size() == 0)
        return Scalar(0);
    return x.squaredNorm() / static_cast<Scalar>(x.size());
}

template <typename Derived>
typename Derived::Scalar rms(const Eigen::MatrixBase<Derived>& x)
{
    return std::sqrt(mean_power(x));
}

/// Pearson correlation over the common prefix of `a` and `b`. Returns 0 when
/// either side has zero variance.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar pearson(const Eigen::MatrixBase<DerivedA>& a,
                                  const Eigen::MatrixBase<DerivedB>& b)
{
    using Scalar = typename DerivedA::Scalar;
    const Eigen::Index n = std::min(a.size(), b.size());
    if (n < 2)
        return Scalar(0);
    const auto ah = a.head(n).array() - a.head(n).mean();
    const auto bh = b.head(n).array() - b.head(n).mean();
    const Scalar den = std::sqrt((ah * ah).sum() * (bh * bh).sum());
    if (!(den > Scalar(0)))
        return Scalar(0);
    return (ah * bh).sum() / den;
}

/// 10·log10(signal / noise). Throws zero_noise_power when noise ≤ 0.
double snr_db(double signal_power, double noise_power);

/// Segment SNR of a recording: the noise segment estimates the noise power,
/// and the signal power is the signal segment's power minus that estimate.
double segment_snr_db(const AudioBuffer& recording, Segment signal, Segment noise);

/// SNR of `estimate` against a clean `reference` after a least-squares gain
/// fit, so a pure scale difference costs nothing.
double reference_snr_db(const Eigen::VectorXd& estimate, const Eigen::VectorXd& reference);

// ---------------------------------------------------------------------------
// Filtering
// ---------------------------------------------------------------------------

enum class FilterKind { high_pass, low_pass };

struct FilterSpec {
    FilterKind kind = FilterKind::high_pass;
    double cutoff = 50.0; // Hz
    int order = 4;
};

/// One second-order section, normalised so a0 = 1. First-order sections keep
/// b2 = a2 = 0.
struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0;
    double a1 = 0, a2 = 0;
};

/// Butterworth design as a cascade of bilinear-transformed sections.
std::vector<Biquad> design_butterworth(const FilterSpec& spec, double rate);

/// Causal cascade filtering; output length equals input length.
Eigen::VectorXd filter_cascade(const std::vector<Biquad>& sections, const Eigen::VectorXd& x);

AudioBuffer apply_filter(const AudioBuffer& buffer, const FilterSpec& spec);

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

/// Band-limited resampling with a 64-tap Kaiser (beta = 8) windowed sinc. The
/// passband edge sits just below min(input, target) Nyquist. Output length is
/// floor(N * target / rate). Same-rate calls return the input unchanged.
AudioBuffer resample(const AudioBuffer& buffer, double target_rate);

/// Reads a sampled signal at the instants of a new sample clock using sinc
/// interpolation at the *input* bandwidth. No anti-alias filter is applied,
/// so content above target/2 folds down the way it does in a real ADC.
Eigen::VectorXd sample_at_rate(const Eigen::VectorXd& x, double rate, double target_rate);

// ---------------------------------------------------------------------------
// Short-time Fourier transform
// ---------------------------------------------------------------------------

struct StftParams {
    Eigen::Index window_len = 256;
    Eigen::Index hop = 64;
    Eigen::Index fft_len = 512;

    Eigen::Index bins() const { return fft_len / 2 + 1; }
    void validate() const;
    bool operator==(const StftParams&) const = default;
};

/// Periodic Hann window.
Eigen::VectorXd hann_window(Eigen::Index n);

/// Magnitude spectrogram; rows are frames, columns are frequency bins.
struct Spectrogram {
    Eigen::MatrixXd magnitudes;
    double frame_hop = 0;   // seconds
    double bin_width = 0;   // Hz
    double origin_rate = 0; // Hz

    Eigen::Index frames() const { return magnitudes.rows(); }
    Eigen::Index bins() const { return magnitudes.cols(); }
};

/// Complex STFT with the geometry needed to invert it.
struct ComplexSpectrogram {
    Eigen::MatrixXcd bins; // frames x (fft_len/2 + 1)
    StftParams params;
    double rate = 0;
    Eigen::Index signal_length = 0;

    Eigen::Index frames() const { return bins.rows(); }
};

inline Eigen::Index stft_frame_count(Eigen::Index n, const StftParams& p)
{
    return (n - p.window_len) / p.hop + 1;
}

ComplexSpectrogram stft_complex(const AudioBuffer& buffer, const StftParams& params);
Spectrogram magnitude(const ComplexSpectrogram& spec);
Spectrogram stft(const AudioBuffer& buffer, Eigen::Index window_len, Eigen::Index hop,
                 Eigen::Index fft_len);

/// Weighted overlap-add inverse (Hann synthesis window, normalised by the
/// summed squared window). Samples no frame covers come back as zero.
AudioBuffer istft(const ComplexSpectrogram& spec);

} // namespace powerleak
