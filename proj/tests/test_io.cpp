#include <doctest.h>

#include <fstream>

#include "powerleak/config_text.hpp"
#include "powerleak/devices.hpp"
#include "powerleak/random.hpp"
#include "powerleak/trace_io.hpp"
#include "powerleak/wav.hpp"
#include "test_util.hpp"

using namespace powerleak;
using Eigen::VectorXd;

namespace {

void put16(std::ofstream& o, std::uint16_t v) { o.write(reinterpret_cast<const char*>(&v), 2); }
void put32(std::ofstream& o, std::uint32_t v) { o.write(reinterpret_cast<const char*>(&v), 4); }

// Minimal stereo 16-bit writer so the loader's down-mix has an input.
void write_stereo(const std::filesystem::path& p, const std::vector<std::int16_t>& interleaved, std::uint32_t rate)
{
    std::ofstream o(p, std::ios::binary);
    const auto bytes = static_cast<std::uint32_t>(interleaved.size() * 2);
    o.write("RIFF", 4);
    put32(o, 36 + bytes);
    o.write("WAVEfmt ", 8);
    put32(o, 16);
    put16(o, 1);
    put16(o, 2);
    put32(o, rate);
    put32(o, rate * 4);
    put16(o, 4);
    put16(o, 16);
    o.write("data", 4);
    put32(o, bytes);
    o.write(reinterpret_cast<const char*>(interleaved.data()), bytes);
}

} // namespace

TEST_CASE("wav pcm16 round trip within one LSB")
{
    testutil::TempDir dir("wav16");
    const AudioBuffer x = testutil::tone(440, 8000, 0.25, 0.7);
    CHECK(save_wav(x, dir.path / "a.wav") == 0);
    const AudioBuffer y = load_wav(dir.path / "a.wav");
    CHECK(y.rate == 8000);
    REQUIRE(y.size() == x.size());
    CHECK((y.samples - x.samples).cwiseAbs().maxCoeff() <= 1.0 / 32768 + 1e-12);
}

TEST_CASE("wav float32 round trip and clipping count")
{
    testutil::TempDir dir("wavf");
    VectorXd v = 0.1 * gaussian_noise(1000, 2);
    v[10] = 1.5;
    v[11] = -2.0;
    CHECK(save_wav(AudioBuffer(v, 44100), dir.path / "f.wav", WavDepth::float32) == 2);
    const AudioBuffer y = load_wav(dir.path / "f.wav");
    CHECK(y.rate == 44100);
    CHECK(y.samples[10] == 1.0);
    CHECK(y.samples[11] == -1.0);
    CHECK(y.samples[500] == doctest::Approx(v[500]).epsilon(1e-6));
}

TEST_CASE("stereo wav is averaged to mono")
{
    testutil::TempDir dir("wavst");
    write_stereo(dir.path / "s.wav", {16384, 0, -16384, 16384, 8192, 8192}, 16000);
    const AudioBuffer y = load_wav(dir.path / "s.wav");
    REQUIRE(y.size() == 3);
    CHECK(y.samples[0] == doctest::Approx(0.25));
    CHECK(y.samples[1] == doctest::Approx(0.0));
    CHECK(y.samples[2] == doctest::Approx(0.25));
}

TEST_CASE("wav error paths")
{
    testutil::TempDir dir("wavbad");
    try {
        load_wav(dir.path / "missing.wav");
        FAIL("expected missing_file");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::missing_file);
    }
    {
        std::ofstream o(dir.path / "junk.wav", std::ios::binary);
        o << "this is not a riff file at all, not even close";
    }
    try {
        load_wav(dir.path / "junk.wav");
        FAIL("expected malformed_header");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::malformed_header);
    }
    CHECK_THROWS_AS(save_wav(testutil::tone(1, 8000, 0.1), dir.path / "no" / "such" / "dir.wav"), Error);
}

TEST_CASE("trace csv and raw round trips keep rate and unit")
{
    testutil::TempDir dir("trace");
    const CurrentTrace t(0.25 + 0.01 * gaussian_noise(400, 1).array(), 8000);
    write_trace_csv(t, dir.path / "t.csv");
    const CurrentTrace c = read_trace_csv<Amperes>(dir.path / "t.csv");
    CHECK(c.rate == doctest::Approx(8000));
    CHECK((c.values - t.values).cwiseAbs().maxCoeff() < 1e-12);

    write_trace_raw(t, dir.path / "t.f32");
    const CurrentTrace r = read_trace_raw<Amperes>(dir.path / "t.f32");
    CHECK(r.rate == 8000);
    CHECK((r.values - t.values).cwiseAbs().maxCoeff() < 1e-7);
    CHECK_THROWS_AS(read_trace_raw<Volts>(dir.path / "t.f32"), Error);
}

TEST_CASE("builtin registry has the nine phones")
{
    const auto& d = builtin_devices();
    CHECK(d.size() == 9);
    CHECK(find_device(d, "pixel 4xl").f_s == 32000);
    CHECK(find_device(d, "Note 10").f_s == 44100);
    CHECK(find_device(d, "Pocophone").leaked_snr_db == doctest::Approx(1.51));
    CHECK_THROWS_AS(find_device(d, "Nokia 3310"), Error);
}

TEST_CASE("registry text round trips")
{
    const auto& d = builtin_devices();
    const auto again = parse_device_registry(format_device_registry(d));
    REQUIRE(again.size() == d.size());
    for (size_t i = 0; i < d.size(); ++i) {
        CHECK(again[i].name == d[i].name);
        CHECK(again[i].f_s == d[i].f_s);
        CHECK(again[i].leaked_snr_db == d[i].leaked_snr_db);
        CHECK(again[i].speakers == d[i].speakers);
    }
}

TEST_CASE("registry validation")
{
    const char* bad_rate = "[X]\nport = usb-c\nsampling_rate_hz = 22050\ninjection_snr_db = 1\n"
                           "leaked_snr_db = 1\nspeakers = single\naccuracy_ref = 0.5\n";
    CHECK_THROWS_AS(parse_device_registry(bad_rate), Error);
    const char* missing = "[X]\nport = usb-c\nsampling_rate_hz = 48000\n";
    CHECK_THROWS_AS(parse_device_registry(missing), Error);
    CHECK_THROWS_AS(parse_device_registry(""), Error);
    CHECK_THROWS_AS(load_device_registry("/nonexistent/devices.ini"), Error);
}

TEST_CASE("shipped registry file matches the built-in table")
{
    const auto file = load_device_registry(POWERLEAK_DATA_DIR "/devices.ini");
    const auto& builtin = builtin_devices();
    REQUIRE(file.size() == builtin.size());
    for (size_t i = 0; i < file.size(); ++i) {
        CHECK(file[i].name == builtin[i].name);
        CHECK(file[i].injection_snr_db == builtin[i].injection_snr_db);
        CHECK(file[i].accuracy_ref == builtin[i].accuracy_ref);
    }
}

TEST_CASE("config text parsing")
{
    const auto s = text::parse_sections("a = 1 # comment\n\n[Sec]\nKey = Two words\n");
    REQUIRE(s.size() == 2);
    CHECK(s[0].name.empty());
    CHECK(s[0].values.at("a") == "1");
    CHECK(s[1].name == "Sec");
    CHECK(s[1].values.at("key") == "Two words");
    CHECK(text::split_list(" a, b ,c") == std::vector<std::string>{"a", "b", "c"});
    CHECK(text::to_bool("yes", "k"));
    CHECK_FALSE(text::to_bool("off", "k"));
    CHECK_THROWS_AS(text::to_double("1.5x", "k"), Error);
    CHECK_THROWS_AS(text::to_int("2.5", "k"), Error);
    CHECK(text::to_double(text::format_double(0.1 + 0.2), "k") == 0.1 + 0.2);
}
