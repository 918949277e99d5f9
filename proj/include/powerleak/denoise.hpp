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

// Recovering audio from a charging-current trace: high-pass to a primitive
// audio signal, then magnitude spectral subtraction against a noise profile
// measured on the idle phone.

#pragma once

#include <filesystem>

#include "powerleak/channel.hpp"
#include "powerleak/signal.hpp"

namespace powerleak {

/// Denoising STFT geometry at 8 kHz: 512-point FFT, 256-sample Hann window,
/// 64-sample hop. A quarter-window hop keeps the summed squared window flat,
/// which is what makes the overlap-add inverse non-expansive.
inline constexpr StftParams kDenoiseStft{256, 64, 512};

inline constexpr double kDefaultSpectralFloor = 0.02;
inline constexpr double kDefaultHighPassHz = 50.0;

/// Per-bin mean noise magnitude N(w).
struct NoiseProfile {
    Eigen::VectorXd mean_magnitude;
    double bin_width = 0;
    int frames_used = 0;
    StftParams params = kDenoiseStft;
    double rate = 0;

    void validate() const;
};

/// Mean-removed, 4th-order Butterworth high-passed trace, not normalised.
AudioBuffer highpass_trace(const CurrentTrace& trace, double hp_cutoff = kDefaultHighPassHz);

/// highpass_trace scaled to max|x| = 1. Throws degenerate_trace for constant
/// traces.
AudioBuffer recover_primitive(const CurrentTrace& trace, double hp_cutoff = kDefaultHighPassHz);

/// Mean STFT magnitude over an idle recording; needs at least 10 frames.
NoiseProfile estimate_noise(const AudioBuffer& idle, const StftParams& params = kDenoiseStft);

/// |X_c| = max(|X_n| - N, floor * |X_n|) with the noisy phase kept. The input
/// is zero-padded by one window on each side so every sample is covered by
/// full frames; the output has the input's length.
AudioBuffer spectral_subtract(const AudioBuffer& noisy, const NoiseProfile& profile,
                              double floor = kDefaultSpectralFloor);

/// CSV with header `bin_hz,magnitude`; geometry goes in leading `#` lines.
void write_noise_profile_csv(const NoiseProfile& profile, const std::filesystem::path& path);
NoiseProfile read_noise_profile_csv(const std::filesystem::path& path);

} // namespace powerleak
