#include <doctest.h>

#include <random>

#include "powerleak/denoise.hpp"
#include "powerleak/random.hpp"
#include "test_util.hpp"

using namespace powerleak;
using Eigen::VectorXd;

namespace {

constexpr double kRate = 8000;

AudioBuffer white(Eigen::Index n, double sd, std::uint64_t seed)
{
    return {sd * gaussian_noise(n, seed), kRate};
}

} // namespace

TEST_CASE("tone in white noise at 0 dB gains at least 6 dB")
{
    const AudioBuffer clean = testutil::tone(1000, kRate, 2.0, 0.5);
    const double sd = rms(clean.samples); // 0 dB SNR
    const AudioBuffer noisy(clean.samples + white(clean.size(), sd, 1).samples, kRate);
    const NoiseProfile profile = estimate_noise(white(16000, sd, 2));
    const AudioBuffer out = spectral_subtract(noisy, profile);
    REQUIRE(out.size() == noisy.size());
    const double before = reference_snr_db(noisy.samples, clean.samples);
    const double after = reference_snr_db(out.samples, clean.samples);
    CHECK(before == doctest::Approx(0.0).epsilon(0.3));
    CHECK(after - before >= 6.0);
}

TEST_CASE("spectral subtraction never adds energy")
{
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0, 1);
        const double f = 100 + 3000 * u(rng);
        const double sd = 0.01 + 0.5 * u(rng);
        const Eigen::Index n = 600 + static_cast<Eigen::Index>(6000 * u(rng));
        const AudioBuffer x(testutil::tone(f, kRate, static_cast<double>(n) / kRate, u(rng)).samples.head(n) +
                                white(n, sd, derive_seed(seed, 1)).samples,
                            kRate);
        const NoiseProfile p = estimate_noise(white(4000, sd * (0.2 + 2 * u(rng)), derive_seed(seed, 2)));
        const AudioBuffer y = spectral_subtract(x, p, 0.02 + 0.3 * u(rng));
        CAPTURE(seed);
        CHECK(y.samples.squaredNorm() <= x.samples.squaredNorm() * (1 + 1e-9));
    }
}

TEST_CASE("zero noise profile leaves the signal unchanged")
{
    const AudioBuffer x = white(3000, 0.2, 7);
    NoiseProfile p = estimate_noise(white(4000, 0.1, 8));
    p.mean_magnitude.setZero();
    const AudioBuffer y = spectral_subtract(x, p);
    CHECK((y.samples - x.samples).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("noise profile needs ten frames and a matching rate")
{
    CHECK_THROWS_AS(estimate_noise(white(256 + 8 * 64, 0.1, 1)), Error);
    CHECK_NOTHROW(estimate_noise(white(256 + 9 * 64, 0.1, 1)));
    const NoiseProfile p = estimate_noise(white(4000, 0.1, 1));
    CHECK(p.frames_used == stft_frame_count(4000, kDenoiseStft));
    CHECK(p.mean_magnitude.size() == kDenoiseStft.bins());
    CHECK_THROWS_AS(spectral_subtract(AudioBuffer(VectorXd::Zero(1000), 16000), p), Error);
}

TEST_CASE("noise profile csv round trip")
{
    testutil::TempDir dir("profile");
    const NoiseProfile p = estimate_noise(white(4000, 0.1, 3));
    write_noise_profile_csv(p, dir.path / "n.csv");
    const NoiseProfile q = read_noise_profile_csv(dir.path / "n.csv");
    CHECK(q.rate == p.rate);
    CHECK(q.frames_used == p.frames_used);
    CHECK(q.params == p.params);
    CHECK((q.mean_magnitude - p.mean_magnitude).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("recover_primitive removes offset and normalises")
{
    const AudioBuffer x = testutil::tone(400, kRate, 1.0, 0.01);
    const CurrentTrace t((x.samples.array() + 0.3).matrix(), kRate);
    const AudioBuffer p = recover_primitive(t);
    CHECK(p.samples.cwiseAbs().maxCoeff() == doctest::Approx(1.0));
    CHECK(std::abs(p.samples.tail(4000).mean()) < 1e-3);
    // the high-pass shifts phase at 400 Hz but the settled part is still a clean sine
    const VectorXd settled = p.samples.tail(4000);
    CHECK(rms(settled) / settled.cwiseAbs().maxCoeff() == doctest::Approx(std::sqrt(0.5)).epsilon(0.01));
    CHECK_THROWS_AS(recover_primitive(CurrentTrace(VectorXd::Constant(800, 0.3), kRate)), Error);
}
