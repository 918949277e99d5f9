#include <doctest.h>

#include <fstream>
#include <sstream>

#include "powerleak/harness.hpp"
#include "test_util.hpp"

using namespace powerleak;

namespace {

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<Utterance> small_digits()
{
    SyntheticCorpusSpec spec;
    spec.speakers = 1;
    spec.repetitions = 1;
    spec.seed = 5;
    return synthetic_digit_corpus(spec);
}

std::vector<DeviceProfile> two_devices()
{
    return {find_device(builtin_devices(), "Honor 10"), find_device(builtin_devices(), "Pocophone")};
}

} // namespace

TEST_CASE("experiment config round trips through its canonical form")
{
    ExperimentSpec s;
    s.kind = ExperimentKind::volume_sweep;
    s.devices = {"Honor 10", "Pixel 4XL"};
    s.volumes = {1.0, 0.75, 0.5};
    s.seed = 99;
    s.touch_period = 2;
    const ExperimentSpec back = parse_experiment(format_experiment(s));
    CHECK(format_experiment(back) == format_experiment(s));
    CHECK(config_hash(back) == config_hash(s));
    CHECK(config_hash(back).size() == 16);
    s.out = "elsewhere";
    CHECK(config_hash(back) == config_hash(s));
    s.seed = 100;
    CHECK(config_hash(back) != config_hash(s));
}

TEST_CASE("experiment config validation")
{
    CHECK_THROWS_AS(parse_experiment("colour = blue\n"), Error);
    CHECK_THROWS_AS(parse_experiment("kind = teleport\n"), Error);
    CHECK_THROWS_AS(parse_experiment("volumes = 1.2\n"), Error);
    CHECK_THROWS_AS(parse_experiment("volumes = 0\n"), Error);
    CHECK_THROWS_AS(parse_experiment("kind = volume_sweep\nvolumes = 0.5, 1.0\n"), Error);
    CHECK_THROWS_AS(parse_experiment("[other]\nseed = 1\n"), Error);
    const ExperimentSpec s = parse_experiment("# comment\nkind = noise_sweep\ndevices = all\nseed = 4\n");
    CHECK(s.kind == ExperimentKind::noise_sweep);
    CHECK(s.devices.empty());
    CHECK(s.seed == 4);
    CHECK_THROWS_AS(load_experiment("/nonexistent/exp.ini"), Error);
}

TEST_CASE("report rows must be finite")
{
    Report r;
    CHECK_THROWS_AS(r.add("f", "d", "c", "m", std::nan("")), Error);
    CHECK_THROWS_AS(r.add("f", "d", "c", "m", INFINITY), Error);
    r.add("f", "d", "c", "m", 1.5);
    CHECK(r.find("f", "d", "c", "m") == 1.5);
    CHECK_FALSE(r.find("f", "d", "c", "x").has_value());
}

TEST_CASE("empty report writes a header-only csv")
{
    testutil::TempDir dir("empty_report");
    const Report r = make_report(ExperimentSpec{});
    const auto files = emit_report(r, dir.path);
    REQUIRE(files.size() == 1);
    CHECK(files[0].filename() == "report.csv");
    const std::string text = slurp(files[0]);
    CHECK(text.find("# toolkit_version: powerleak") != std::string::npos);
    CHECK(text.find("# config_hash: " + config_hash(ExperimentSpec{})) != std::string::npos);
    CHECK(text.substr(text.size() - 30) == "device,condition,metric,value\n");
}

TEST_CASE("nine devices by three metrics give 27 data rows")
{
    testutil::TempDir dir("rows");
    Report r = make_report(ExperimentSpec{});
    for (const auto& d : builtin_devices())
        for (const char* m : {"a", "b", "c"})
            r.add("fam", d.name, "x", m, 1.0);
    const auto files = emit_report(r, dir.path);
    REQUIRE(files.size() == 1);
    std::istringstream in(slurp(files[0]));
    int data = 0;
    bool header = false;
    for (std::string line; std::getline(in, line);) {
        if (line.starts_with("#"))
            continue;
        if (!header) {
            CHECK(line == "device,condition,metric,value");
            header = true;
            continue;
        }
        ++data;
    }
    CHECK(data == 27);
}

TEST_CASE("report files are byte-identical on rerun")
{
    testutil::TempDir a("rerun_a"), b("rerun_b");
    ExperimentSpec s;
    const auto corpus = small_digits();
    const auto r1 = run_eavesdrop_eval(s, corpus, two_devices());
    const auto r2 = run_eavesdrop_eval(s, corpus, two_devices());
    const auto fa = emit_report(r1, a.path);
    const auto fb = emit_report(r2, b.path);
    REQUIRE(fa.size() == fb.size());
    for (size_t i = 0; i < fa.size(); ++i)
        CHECK(slurp(fa[i]) == slurp(fb[i]));
}

TEST_CASE("csv fields with commas are quoted")
{
    testutil::TempDir dir("quote");
    Report r;
    r.add("f", "Dev, Inc", "c", "m", 2);
    const std::string text = slurp(emit_report(r, dir.path).front());
    CHECK(text.find("\"Dev, Inc\",c,m,2") != std::string::npos);
}

TEST_CASE("injection eval on a clean chain")
{
    ExperimentSpec s;
    const auto corpus = synthetic_command_corpus(3, 8);
    const Report r = run_injection_eval(s, corpus, two_devices());
    for (const auto& d : two_devices()) {
        CHECK(r.find("injection", d.name, "k=0.1", "success_rate") == 1.0);
        CHECK(r.find("injection", d.name, "k=0.1", "snr_db").value() > 15);
        CHECK(r.find("injection", d.name, "k=0.1", "errors") == 0.0);
    }
}

TEST_CASE("injection with an over-driven k yields error rows, not a crash")
{
    ExperimentSpec s;
    s.injection_k = 5.0;
    const auto corpus = synthetic_command_corpus(2, 8);
    const Report r = run_injection_eval(s, corpus, two_devices());
    CHECK(r.find("injection", "Honor 10", "k=5", "errors") == 2.0);
    CHECK(r.find("injection", "Honor 10", "k=5", "success_rate") == 0.0);
    CHECK(r.find("injection_errors", "Honor 10", "utterance=0", "error_negative_voltage") == 1.0);
}

TEST_CASE("eavesdrop eval rejects an empty corpus")
{
    try {
        run_eavesdrop_eval(ExperimentSpec{}, {}, two_devices());
        FAIL("expected a validation error");
    } catch (const Error& e) {
        CHECK(is_validation_error(e.code()));
    }
}

TEST_CASE("eavesdrop recovers the band and stays below the air baseline")
{
    const Report r = run_eavesdrop_eval(ExperimentSpec{}, synthetic_command_corpus(3, 2), two_devices());
    for (const auto& d : two_devices()) {
        CHECK(r.find("eavesdrop", d.name, "adc=10000hz", "band_correlation").value() >= 0.95);
        CHECK(r.find("eavesdrop", d.name, "adc=10000hz", "snr_db").value() <
              r.find("eavesdrop", d.name, "adc=10000hz", "air_snr_db").value());
    }
}

TEST_CASE("electric pipelines ignore the acoustic environment")
{
    ExperimentSpec s;
    s.acoustic_noise_levels = {30, 90};
    const auto corpus = small_digits();
    std::vector<Utterance> few(corpus.begin(), corpus.begin() + 3);
    const DigitModel m = DigitModel::initialized(CnnArchitecture{}, 3);
    const Report r = noise_sweep(s, few, two_devices(), &m);
    for (const char* level : {"noise_db=30", "noise_db=90"}) {
        CHECK(r.find("noise_electric", "Honor 10", level, "injection_identical") == 1.0);
        CHECK(r.find("noise_electric", "Honor 10", level, "eavesdrop_identical") == 1.0);
        CHECK(r.find("noise_electric", "Honor 10", level, "powerline_identical") == 1.0);
    }
    CHECK(r.find("noise_electric", "Honor 10", "noise_db=30", "powerline_accuracy") ==
          r.find("noise_electric", "Honor 10", "noise_db=90", "powerline_accuracy"));
    CHECK(r.find("noise_air", "Honor 10", "noise_db=30", "mean_correlation").value() >
          r.find("noise_air", "Honor 10", "noise_db=90", "mean_correlation").value());
}

TEST_CASE("volume 1 row of a sweep equals the powerline eval")
{
    ExperimentSpec s;
    s.volumes = {1.0, 0.5};
    const auto corpus = small_digits();
    const DigitModel m = DigitModel::initialized(CnnArchitecture{}, 8);
    const auto devices = two_devices();
    const Report sweep = volume_sweep(s, corpus, devices, m);
    ExperimentSpec one = s;
    one.volumes = {1.0};
    const Report eval = run_powerline_eval(one, corpus, devices, m);
    for (const auto& d : devices)
        for (const char* metric : {"accuracy", "leaked_snr_db"})
            CHECK(sweep.find("volume_sweep", d.name, "volume=1", metric) ==
                  eval.find("powerline", d.name, "volume=1", metric));
    CHECK(eval.find("powerline", "Honor 10", "volume=1", "leaked_snr_db").value() == doctest::Approx(5.75));
    // every confusion cell is present
    int cells = 0;
    for (const auto& row : eval.rows)
        cells += row.family == "confusion" && row.device == "Honor 10";
    CHECK(cells == 100);
}

TEST_CASE("volume sweep requires descending levels")
{
    ExperimentSpec s;
    s.volumes = {0.5, 1.0};
    const DigitModel m{CnnArchitecture{}};
    CHECK_THROWS_AS(volume_sweep(s, small_digits(), two_devices(), m), Error);
}

TEST_CASE("touch bursts produce per-segment accuracy rows")
{
    ExperimentSpec s;
    s.touch_period = 2.0;
    s.touch_duration = 0.4;
    const DigitModel m = DigitModel::initialized(CnnArchitecture{}, 8);
    const Report r = run_powerline_eval(s, small_digits(), {find_device(builtin_devices(), "Honor 10")}, m);
    CHECK(r.find("powerline", "Honor 10", "volume=1", "accuracy_touch").has_value());
    CHECK(r.find("powerline", "Honor 10", "volume=1", "accuracy_between_bursts").has_value());
}

TEST_CASE("leak_once skips denoising with the noise model off")
{
    PowerlineConfig cfg = powerline_config_for(find_device(builtin_devices(), "Honor 10"));
    cfg.noise.enabled = false;
    const auto corpus = small_digits();
    const LeakTrial t = leak_once(corpus[4].audio, cfg, 1.0, 1);
    CHECK(t.cleaned.samples == t.primitive.samples);
    CHECK_FALSE(t.leaked_snr_db.has_value());
}

TEST_CASE("channel features cycle devices and keep labels")
{
    const auto corpus = small_digits();
    const auto f = channel_features(corpus, two_devices(), 3, 5);
    REQUIRE(f.size() == 10);
    for (size_t i = 0; i < f.size(); ++i)
        CHECK(f[i].label == corpus[i].digit);
    CHECK(clean_features(corpus).size() == 10);
}

TEST_CASE("corpus sources resolve")
{
    CHECK(resolve_corpus("synthetic-commands:count=3,seed=1").size() == 3);
    CHECK(resolve_corpus("synthetic-digits:speakers=1,reps=1").size() == 10);
    CHECK_THROWS_AS(resolve_corpus("synthetic-digits:speakers"), Error);
    CHECK_THROWS_AS(resolve_corpus("/nonexistent/corpus"), Error);
    ExperimentSpec s;
    s.devices = {"pixel 1"};
    CHECK(resolve_devices(s).front().name == "Pixel 1");
    s.devices = {"unknown phone"};
    CHECK_THROWS_AS(resolve_devices(s), Error);
}
