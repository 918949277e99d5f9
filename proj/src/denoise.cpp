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

#include "powerleak/denoise.hpp"

#include <fstream>

#include "powerleak/config_text.hpp"

namespace powerleak {

using Eigen::Index;
using Eigen::VectorXd;

void NoiseProfile::validate() const
{
    params.validate();
    require(mean_magnitude.size() == params.bins(), "noise profile bin count does not match its FFT length",
            Errc::geometry_mismatch);
    require(frames_used >= 1, "noise profile must average at least one frame");
    require((mean_magnitude.array() >= 0).all() && mean_magnitude.allFinite(),
            "noise profile magnitudes must be finite and non-negative");
}

AudioBuffer highpass_trace(const CurrentTrace& trace, double hp_cutoff)
{
    require(trace.size() > 0, "empty current trace");
    const VectorXd centred = trace.values.array() - trace.values.mean();
    const AudioBuffer centred_audio(centred, trace.rate);
    return apply_filter(centred_audio, FilterSpec{FilterKind::high_pass, hp_cutoff, 4});
}

AudioBuffer recover_primitive(const CurrentTrace& trace, double hp_cutoff)
{
    require(trace.size() > 0, "empty current trace");
    if (trace.values.maxCoeff() == trace.values.minCoeff())
        fail(Errc::degenerate_trace, "constant current trace holds no audio");
    AudioBuffer x = highpass_trace(trace, hp_cutoff);
    const double peak = x.samples.cwiseAbs().maxCoeff();
    if (!(peak > 0))
        fail(Errc::degenerate_trace, "nothing left after high-pass filtering");
    x.samples /= peak;
    return x;
}

NoiseProfile estimate_noise(const AudioBuffer& idle, const StftParams& params)
{
    params.validate();
    if (idle.size() < params.window_len || stft_frame_count(idle.size(), params) < 10)
        fail(Errc::too_short, "idle segment must span at least 10 STFT frames");
    const Spectrogram s = magnitude(stft_complex(idle, params));
    NoiseProfile p;
    p.mean_magnitude = s.magnitudes.colwise().mean().transpose();
    p.bin_width = s.bin_width;
    p.frames_used = static_cast<int>(s.frames());
    p.params = params;
    p.rate = idle.rate;
    return p;
}

AudioBuffer spectral_subtract(const AudioBuffer& noisy, const NoiseProfile& profile, double floor)
{
    profile.validate();
    require(floor >= 0 && floor <= 1, "spectral floor must lie in [0, 1]");
    if (noisy.rate != profile.rate)
        fail(Errc::geometry_mismatch, "noise profile was measured at a different sample rate");

    const Index w = profile.params.window_len;
    VectorXd padded = VectorXd::Zero(noisy.size() + 2 * w);
    padded.segment(w, noisy.size()) = noisy.samples;

    ComplexSpectrogram spec = stft_complex(AudioBuffer(std::move(padded), noisy.rate), profile.params);
    for (Index f = 0; f < spec.frames(); ++f) {
        for (Index k = 0; k < spec.bins.cols(); ++k) {
            const double mag = std::abs(spec.bins(f, k));
            if (mag == 0)
                continue;
            const double cleaned = std::max(mag - profile.mean_magnitude[k], floor * mag);
            spec.bins(f, k) *= cleaned / mag;
        }
    }
    const AudioBuffer out = istft(spec);
    return AudioBuffer(out.samples.segment(w, noisy.size()), noisy.rate);
}

void write_noise_profile_csv(const NoiseProfile& profile, const std::filesystem::path& path)
{
    profile.validate();
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        fail(Errc::unwritable_path, path.string());
    out << "# rate=" << text::format_double(profile.rate) << '\n'
        << "# window_len=" << profile.params.window_len << '\n'
        << "# hop=" << profile.params.hop << '\n'
        << "# fft_len=" << profile.params.fft_len << '\n'
        << "# frames_used=" << profile.frames_used << '\n'
        << "bin_hz,magnitude\n";
    for (Index k = 0; k < profile.mean_magnitude.size(); ++k)
        out << text::format_double(static_cast<double>(k) * profile.bin_width) << ','
            << text::format_double(profile.mean_magnitude[k]) << '\n';
    if (!out)
        fail(Errc::io_error, path.string());
}

NoiseProfile read_noise_profile_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        fail(Errc::missing_file, path.string());
    NoiseProfile p;
    p.frames_used = 0;
    bool header_seen = false;
    std::vector<double> bins_hz, mags;
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = text::trim(line);
        if (t.empty())
            continue;
        if (t.front() == '#') {
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                continue;
            const std::string key = text::trim(std::string_view(t).substr(1, eq - 1));
            const std::string value = text::trim(std::string_view(t).substr(eq + 1));
            if (key == "rate")
                p.rate = text::to_double(value, key);
            else if (key == "window_len")
                p.params.window_len = text::to_int(value, key);
            else if (key == "hop")
                p.params.hop = text::to_int(value, key);
            else if (key == "fft_len")
                p.params.fft_len = text::to_int(value, key);
            else if (key == "frames_used")
                p.frames_used = static_cast<int>(text::to_int(value, key));
            continue;
        }
        if (!header_seen) {
            if (t != "bin_hz,magnitude")
                fail(Errc::malformed_header, path.string() + ": expected header 'bin_hz,magnitude'");
            header_seen = true;
            continue;
        }
        const auto cols = text::split_list(t);
        if (cols.size() != 2)
            fail(Errc::malformed_header, path.string() + ": expected two columns");
        bins_hz.push_back(text::to_double(cols[0], "bin_hz"));
        mags.push_back(text::to_double(cols[1], "magnitude"));
    }
    if (!header_seen || mags.size() < 2)
        fail(Errc::malformed_header, path.string() + ": no profile rows");
    p.mean_magnitude = Eigen::Map<const VectorXd>(mags.data(), static_cast<Index>(mags.size()));
    p.bin_width = bins_hz[1] - bins_hz[0];
    if (p.rate == 0)
        p.rate = p.bin_width * static_cast<double>(p.params.fft_len);
    p.validate();
    return p;
}

} // namespace powerleak
