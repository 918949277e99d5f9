#include <doctest.h>

#include "powerleak/channel.hpp"
#include "powerleak/devices.hpp"
#include "powerleak/random.hpp"
#include "test_util.hpp"

using namespace powerleak;
using Eigen::VectorXd;

namespace {

InjectionConfig injection_for(const char* device)
{
    InjectionConfig cfg;
    cfg.device = find_device(builtin_devices(), device);
    return cfg;
}

Eigen::Index spectral_peak(const VectorXd& x, double rate, double* bin_width)
{
    const Spectrogram s = stft(AudioBuffer(x, rate), 256, 64, 512);
    *bin_width = s.bin_width;
    Eigen::Index peak = 0;
    s.magnitudes.colwise().sum().tail(s.bins() - 2).maxCoeff(&peak);
    return peak + 2; // skip DC and the first bin
}

} // namespace

TEST_CASE("adc quantiser is mid-rise and counts clipping")
{
    VectorXd v(4);
    v << 0.0, 0.49, 0.51, 2.0;
    const AdcOutput out = adc_convert(v, 100, 100, 1, {0.0, 1.0});
    CHECK(out.values[0] == 0.25);
    CHECK(out.values[1] == 0.25);
    CHECK(out.values[2] == 0.75);
    CHECK(out.values[3] == 0.75);
    CHECK(out.clipped == 1);
}

TEST_CASE("adc error is bounded by half a step")
{
    const VectorXd v = 0.5 + 0.2 * gaussian_noise(1000, 4).array().tanh();
    const AdcOutput out = adc_convert(v, 8000, 8000, 12, {0.0, 1.0});
    CHECK(out.clipped == 0);
    CHECK((out.values - v).cwiseAbs().maxCoeff() <= 0.5 / 4096 + 1e-15);
}

TEST_CASE("auto_range pads by a tenth of the span")
{
    VectorXd v(3);
    v << 1.0, 2.0, 3.0;
    const AdcRange r = auto_range(v);
    CHECK(r.lo == doctest::Approx(0.8));
    CHECK(r.hi == doctest::Approx(3.2));
    const AdcRange flat = auto_range(VectorXd::Constant(5, 0.25));
    CHECK(flat.hi > flat.lo);
}

TEST_CASE("injection modulation and ideal demodulation are exact inverses")
{
    const AudioBuffer x = testutil::tone(440, 48000, 0.5, 0.9);
    InjectionConfig cfg = injection_for("Honor 10");
    const VoltageTrace v = modulate_injection(x, cfg);
    CHECK(v.values.minCoeff() > 0);
    CHECK(v.values.mean() == doctest::Approx(cfg.dc_offset_in).epsilon(1e-3));
    const AudioBuffer back = phone_record_injected(v, cfg);
    CHECK(pearson(back.samples, x.samples) > 0.999999);
}

TEST_CASE("injection rejects a k that drives the wire negative")
{
    InjectionConfig cfg = injection_for("Honor 10");
    cfg.k = 2.0;
    try {
        modulate_injection(testutil::tone(440, 48000, 0.1, 0.9), cfg);
        FAIL("expected negative_voltage");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::negative_voltage);
    }
}

TEST_CASE("capacitor smoothing has unit DC gain and -3 dB at the cutoff")
{
    const double rate = 192000;
    const VoltageTrace dc(VectorXd::Constant(1000, 1.45), rate);
    CHECK(capacitor_smooth(dc, 10000).values.cwiseAbs().maxCoeff() == doctest::Approx(1.45));

    // first-order low-pass: |H| at fc is close to 1/sqrt(2) when fc << rate
    const AudioBuffer t = testutil::tone(1000, rate, 0.2, 1.0);
    const VectorXd y = capacitor_smooth(VoltageTrace(t.samples, rate), 1000).values;
    CHECK(rms(y.tail(19200)) / rms(t.samples.tail(19200)) == doctest::Approx(std::sqrt(0.5)).epsilon(0.03));
}

TEST_CASE("dac holds codes without adding delay")
{
    InjectionConfig cfg = injection_for("Honor 10");
    cfg.generator_noise_v = 0;
    const AudioBuffer x = testutil::tone(300, 16000, 0.2, 0.5);
    const VoltageTrace analog = drive_dac(modulate_injection(x, cfg), cfg, 1);
    CHECK(analog.rate == cfg.analog_rate);
    CHECK(analog.size() == 12 * x.size());
    // sample j*12 is the code held around input sample j
    const double step = cfg.dac_full_scale / 4096;
    for (Eigen::Index j : {10, 500, 2000})
        CHECK(std::abs(analog.values[12 * j] - (cfg.k * x.samples[j] + cfg.dc_offset_in)) <= step);
}

TEST_CASE("eavesdrop chain round trip")
{
    const AudioBuffer x = testutil::tone(700, 10000, 0.5, 0.8);
    const EavesdropConfig cfg;
    const VoltageTrace v = speaker_wire_voltage(x, cfg, 0.5);
    CHECK(v.values.minCoeff() > 0);
    const auto sampled = adc_sample(v, cfg.adc_rate, cfg.adc_bits, cfg.adc_range);
    CHECK(sampled.clipped == 0);
    const AudioBuffer back = demodulate_eavesdrop(sampled.trace, cfg);
    CHECK(back.samples.cwiseAbs().maxCoeff() == doctest::Approx(1.0));
    CHECK(pearson(back.samples, x.samples) > 0.9999);

    CHECK_THROWS_AS(speaker_wire_voltage(x, cfg, 3.0), Error);
    CHECK_THROWS_AS(demodulate_eavesdrop(VoltageTrace(VectorXd::Constant(100, 1.5), 10000), cfg), Error);
}

TEST_CASE("loudspeaker power doubles the tone frequency")
{
    PowerlineConfig cfg;
    cfg.noise.enabled = false;
    for (double f : {300.0, 900.0, 1500.0}) {
        const AudioBuffer x = testutil::tone(f, 8000, 1.0, 0.5);
        const CurrentTrace t = synthesize_current_trace(x, cfg, 1.0, 3);
        // drop the idle draw and the DC part of the power first
        const VectorXd ac = filter_cascade(design_butterworth({}, t.rate), t.values);
        double width = 0;
        const Eigen::Index peak = spectral_peak(ac, t.rate, &width);
        CHECK(std::abs(static_cast<double>(peak) * width - 2 * f) <= width);
    }
}

TEST_CASE("leak scales with volume squared")
{
    PowerlineConfig cfg;
    const AudioBuffer x = testutil::tone(500, 8000, 0.5);
    const PowerTrace full = loudspeaker_power(x, cfg, 1.0);
    const PowerTrace half = loudspeaker_power(x, cfg, 0.5);
    CHECK((half.values - 0.25 * full.values).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(loudspeaker_power(x, cfg, 0.0), Error);
    CHECK_THROWS_AS(loudspeaker_power(x, cfg, 1.5), Error);
}

TEST_CASE("firmware noise meets the device SNR target at full volume")
{
    for (const auto& d : builtin_devices()) {
        const PowerlineConfig cfg = powerline_config_for(d);
        const AudioBuffer x = testutil::chirp(200, 1800, 8000, 1.0, 0.4);
        const CurrentComponents c = current_components(x, cfg, 1.0, 11);
        const double leak_var = (c.leak.values.array() - c.leak.values.mean()).square().mean();
        const double noise_var = (c.noise.values.array() - c.noise.values.mean()).square().mean();
        CHECK(10 * std::log10(leak_var / noise_var) == doctest::Approx(d.leaked_snr_db).epsilon(1e-6));
    }
}

TEST_CASE("noise level is fixed by the clip, so lower volume lowers SNR by 40 log10")
{
    const PowerlineConfig cfg = powerline_config_for(find_device(builtin_devices(), "Honor 10"));
    const AudioBuffer x = testutil::chirp(200, 1800, 8000, 1.0, 0.4);
    const CurrentComponents full = current_components(x, cfg, 1.0, 5);
    const CurrentComponents half = current_components(x, cfg, 0.5, 5);
    CHECK(full.noise_rms == doctest::Approx(half.noise_rms));
    CHECK(half.noise.values == full.noise.values);
}

TEST_CASE("shaped noise is unit rms and pink noise tilts down")
{
    const VectorXd w = shaped_noise(16384, NoiseShape::white, 1);
    const VectorXd p = shaped_noise(16384, NoiseShape::pink, 1);
    CHECK(rms(w) == doctest::Approx(1.0));
    CHECK(rms(p) == doctest::Approx(1.0));
    const Spectrogram s = stft(AudioBuffer(p, 8000), 256, 64, 512);
    const Eigen::RowVectorXd m = s.magnitudes.array().square().colwise().mean();
    CHECK(m.segment(5, 20).mean() > 4 * m.segment(200, 20).mean());
}

TEST_CASE("touch bursts add energy only inside their window")
{
    PowerlineConfig cfg;
    cfg.noise.touch_bursts = {{0.25, 0.25, 20.0}};
    const AudioBuffer x = testutil::tone(400, 8000, 1.0, 0.3);
    const CurrentComponents c = current_components(x, cfg, 1.0, 2);
    CHECK(c.bursts.values.head(2000).cwiseAbs().maxCoeff() == 0.0);
    CHECK(c.bursts.values.tail(4000).cwiseAbs().maxCoeff() == 0.0);
    CHECK(rms(c.bursts.values.segment(2000, 2000)) == doctest::Approx(10 * c.noise_rms).epsilon(0.15));

    cfg.noise.touch_bursts = {{0.9, 0.5, 20.0}};
    CHECK_THROWS_AS(current_components(x, cfg, 1.0, 2), Error);
}

TEST_CASE("silent clip still gets calibrated firmware noise")
{
    const PowerlineConfig cfg = powerline_config_for(find_device(builtin_devices(), "Pixel 1"));
    const CurrentComponents c = current_components(AudioBuffer(VectorXd::Zero(4000), 8000), cfg, 1.0, 1);
    CHECK(c.noise_rms > 0);
    CHECK(std::isfinite(c.noise_rms));
}

TEST_CASE("idle trace uses the requested noise level")
{
    PowerlineConfig cfg;
    const CurrentTrace idle = synthesize_idle_trace(1.0, cfg, 1e-3, 4);
    CHECK(idle.size() == 8000);
    CHECK(idle.values.mean() == doctest::Approx(cfg.idle_current).epsilon(1e-3));
    const double sd = std::sqrt((idle.values.array() - idle.values.mean()).square().mean());
    CHECK(sd == doctest::Approx(1e-3).epsilon(0.05));
}

TEST_CASE("current trace is deterministic per seed")
{
    const PowerlineConfig cfg = powerline_config_for(find_device(builtin_devices(), "Note 10"));
    const AudioBuffer x = testutil::tone(600, 8000, 0.5);
    CHECK(synthesize_current_trace(x, cfg, 1.0, 9).values == synthesize_current_trace(x, cfg, 1.0, 9).values);
    CHECK(synthesize_current_trace(x, cfg, 1.0, 9).values != synthesize_current_trace(x, cfg, 1.0, 10).values);
}
