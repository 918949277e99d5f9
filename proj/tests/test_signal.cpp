#include <doctest.h>

#include <complex>
#include <random>

#include "powerleak/random.hpp"
#include "powerleak/signal.hpp"
#include "test_util.hpp"

using namespace powerleak;
using Eigen::VectorXd;

namespace {

// Single-bin DFT magnitude, normalised to amplitude.
double tone_amplitude(const VectorXd& x, double freq, double rate)
{
    std::complex<double> acc = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        acc += x[i] * std::polar(1.0, -2 * std::numbers::pi * freq * static_cast<double>(i) / rate);
    return 2 * std::abs(acc) / static_cast<double>(x.size());
}

} // namespace

TEST_CASE("snr_db of known powers")
{
    CHECK(snr_db(100, 1) == doctest::Approx(20));
    CHECK(snr_db(1, 1) == doctest::Approx(0));
    CHECK_THROWS_AS(snr_db(1, 0), Error);
}

TEST_CASE("pearson is scale and offset invariant")
{
    const VectorXd a = gaussian_noise(500, 3);
    CHECK(pearson(a, ((3.0 * a).array() + 2.0).matrix()) == doctest::Approx(1.0));
    CHECK(pearson(a, -a) == doctest::Approx(-1.0));
    CHECK(pearson(a, VectorXd::Constant(500, 1.0)) == 0.0);
    // float expressions go through the same template
    const Eigen::VectorXf f = a.cast<float>();
    CHECK(pearson(f, f) == doctest::Approx(1.0f));
}

TEST_CASE("segment_snr_db subtracts the noise estimate")
{
    const double rate = 8000;
    VectorXd x = 0.01 * gaussian_noise(16000, 5);
    x.tail(8000) += testutil::tone(500, rate, 1.0, 0.5).samples;
    // tone power 0.125, noise power 1e-4
    const double snr = segment_snr_db(AudioBuffer(x, rate), {8000, 16000}, {0, 8000});
    CHECK(snr == doctest::Approx(10 * std::log10(0.125 / 1e-4)).epsilon(0.02));
}

TEST_CASE("reference_snr_db ignores a pure gain")
{
    const VectorXd ref = gaussian_noise(4000, 1);
    const VectorXd est = 0.3 * ref + 0.03 * gaussian_noise(4000, 2);
    CHECK(reference_snr_db(est, ref) == doctest::Approx(20).epsilon(0.05));
    CHECK(reference_snr_db(0.3 * ref, ref) > 100);
}

TEST_CASE("butterworth high-pass is 3 dB down at the cutoff")
{
    const double rate = 8000;
    const auto sections = design_butterworth({FilterKind::high_pass, 50, 4}, rate);
    CHECK(sections.size() == 2);
    const AudioBuffer at_cut = testutil::tone(50, rate, 4.0, 1.0);
    const AudioBuffer pass = testutil::tone(1000, rate, 1.0, 1.0);
    const VectorXd y_cut = filter_cascade(sections, at_cut.samples);
    const VectorXd y_pass = filter_cascade(sections, pass.samples);
    // skip the transient
    CHECK(rms(y_cut.tail(16000)) / rms(at_cut.samples.tail(16000)) == doctest::Approx(std::sqrt(0.5)).epsilon(0.02));
    CHECK(rms(y_pass.tail(4000)) / rms(pass.samples.tail(4000)) == doctest::Approx(1.0).epsilon(0.01));
    // DC is removed
    const VectorXd dc = filter_cascade(sections, VectorXd::Ones(16000));
    CHECK(std::abs(dc.tail(1000).mean()) < 1e-6);
}

TEST_CASE("butterworth low-pass odd order has a first-order section")
{
    const auto s = design_butterworth({FilterKind::low_pass, 1000, 5}, 16000);
    REQUIRE(s.size() == 3);
    CHECK(s.back().a2 == 0.0);
    CHECK(s.back().b2 == 0.0);
    const VectorXd y = filter_cascade(s, VectorXd::Ones(4000));
    CHECK(y[3999] == doctest::Approx(1.0));
}

TEST_CASE("filter design rejects cutoffs at or above Nyquist")
{
    CHECK_THROWS_AS(design_butterworth({FilterKind::low_pass, 4000, 4}, 8000), Error);
    CHECK_THROWS_AS(design_butterworth({FilterKind::low_pass, 100, 0}, 8000), Error);
}

TEST_CASE("resample keeps in-band tones and drops out-of-band ones")
{
    const AudioBuffer x = testutil::tone(1000, 48000, 1.0, 0.5);
    const AudioBuffer y = resample(x, 8000);
    CHECK(y.rate == 8000);
    CHECK(y.size() == 8000);
    CHECK(tone_amplitude(y.samples.segment(200, 7600), 1000, 8000) == doctest::Approx(0.5).epsilon(0.01));

    // 6 kHz would alias to 2 kHz without the anti-alias filter
    const AudioBuffer hi = resample(testutil::tone(6000, 48000, 1.0, 0.5), 8000);
    CHECK(rms(hi.samples.segment(200, 7600)) < 0.005);
}

TEST_CASE("resample round trip and identity")
{
    const AudioBuffer x = testutil::tone(440, 16000, 0.5);
    CHECK(resample(x, 16000).samples == x.samples);
    const AudioBuffer back = resample(resample(x, 44100), 16000);
    REQUIRE(back.size() == x.size());
    const Eigen::Index mid = x.size() / 2;
    CHECK((back.samples.segment(100, mid) - x.samples.segment(100, mid)).cwiseAbs().maxCoeff() < 2e-3);
}

TEST_CASE("sample_at_rate aliases like a plain ADC")
{
    // a 6 kHz tone sampled at 8 kHz lands at 2 kHz
    const AudioBuffer x = testutil::tone(6000, 48000, 1.0, 0.5);
    const VectorXd y = sample_at_rate(x.samples, 48000, 8000);
    CHECK(tone_amplitude(y.segment(200, 7600), 2000, 8000) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("hann window is periodic")
{
    const VectorXd w = hann_window(8);
    CHECK(w[0] == 0.0);
    CHECK(w[4] == doctest::Approx(1.0));
    CHECK(w[1] == doctest::Approx(w[7]));
}

TEST_CASE("stft geometry and tone bin")
{
    const AudioBuffer x = testutil::tone(1000, 8000, 1.0);
    const Spectrogram s = stft(x, 256, 64, 512);
    CHECK(s.frames() == stft_frame_count(8000, {256, 64, 512}));
    CHECK(s.bins() == 257);
    CHECK(s.bin_width == doctest::Approx(15.625));
    Eigen::Index peak = 0;
    s.magnitudes.row(10).maxCoeff(&peak);
    CHECK(peak == 64);
}

TEST_CASE("istft inverts stft on covered samples")
{
    const VectorXd x = gaussian_noise(4000, 9);
    const StftParams p{256, 64, 512};
    const AudioBuffer y = istft(stft_complex(AudioBuffer(x, 8000), p));
    REQUIRE(y.size() == x.size());
    const Eigen::Index covered = (stft_frame_count(4000, p) - 1) * p.hop + p.window_len;
    CHECK((y.samples.segment(p.window_len, covered - 2 * p.window_len) -
           x.segment(p.window_len, covered - 2 * p.window_len))
              .cwiseAbs()
              .maxCoeff() < 1e-9);
}

TEST_CASE("stft parameters are validated")
{
    CHECK_THROWS_AS((StftParams{256, 0, 512}.validate()), Error);
    CHECK_THROWS_AS((StftParams{512, 64, 256}.validate()), Error);
    CHECK_THROWS_AS(stft_complex(AudioBuffer(VectorXd::Zero(100), 8000), {256, 64, 512}), Error);
}

TEST_CASE("AudioBuffer rejects bad rates and samples")
{
    CHECK_THROWS_AS(AudioBuffer(VectorXd::Zero(4), 0.0), Error);
    VectorXd bad = VectorXd::Zero(4);
    bad[2] = std::nan("");
    CHECK_THROWS_AS(AudioBuffer(bad, 8000), Error);
}

TEST_CASE("derive_seed separates streams")
{
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(7, 3) == derive_seed(7, 3));
    CHECK(gaussian_noise(10, 4) == gaussian_noise(10, 4));
}
