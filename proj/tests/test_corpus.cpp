#include <doctest.h>

#include "powerleak/corpus.hpp"
#include "powerleak/wav.hpp"
#include "test_util.hpp"

using namespace powerleak;

TEST_CASE("synthetic digit corpus layout")
{
    SyntheticCorpusSpec spec;
    spec.speakers = 2;
    spec.repetitions = 2;
    const auto c = synthetic_digit_corpus(spec);
    REQUIRE(c.size() == 40);
    CHECK(c[0].speaker == "spk00");
    CHECK(c[0].digit == 0);
    CHECK(c[3].digit == 1);
    CHECK(c[20].speaker == "spk01");
    CHECK(c[5].file_name() == "2_spk00_1.wav");
    for (const auto& u : c) {
        CHECK(u.audio.rate == 8000);
        CHECK(u.audio.duration() > 0.3);
        CHECK(u.audio.duration() < 1.3);
        CHECK(u.audio.samples.cwiseAbs().maxCoeff() <= 0.81);
        CHECK(u.text == kDigitWords[u.digit]);
    }
}

TEST_CASE("synthesis is deterministic and seed dependent")
{
    const SpeakerTraits s = make_speaker("a", 3);
    CHECK(synthesize_digit(4, s, 9).samples == synthesize_digit(4, s, 9).samples);
    CHECK(synthesize_digit(4, s, 9).samples != synthesize_digit(4, s, 10).samples);
    CHECK(make_speaker("a", 3).f0 == s.f0);
}

TEST_CASE("digits are spectrally distinct")
{
    // same speaker, different words should not correlate like repetitions do
    const SpeakerTraits s = make_speaker("b", 4);
    const AudioBuffer six = synthesize_word("six", s, 1, 8000);
    const AudioBuffer zero = synthesize_word("zero", s, 1, 8000);
    CHECK(six.size() > 0);
    CHECK(zero.size() > 0);
    CHECK(six.size() != zero.size());
    CHECK_THROWS_AS(synthesize_word("xylophone", s, 1, 8000), Error);
    CHECK_THROWS_AS(synthesize_digit(10, s, 1), Error);
}

TEST_CASE("command corpus")
{
    const auto c = synthetic_command_corpus(12, 5);
    REQUIRE(c.size() == 12);
    for (const auto& u : c) {
        CHECK(u.digit == -1);
        CHECK(u.audio.rate == 16000);
        CHECK(!u.text.empty());
        CHECK(u.file_name().rfind("cmd_", 0) == 0);
    }
}

TEST_CASE("corpus write and load keep labels and order")
{
    testutil::TempDir dir("corpus");
    SyntheticCorpusSpec spec;
    spec.speakers = 1;
    spec.repetitions = 1;
    auto c = synthetic_digit_corpus(spec);
    const auto cmds = synthetic_command_corpus(2, 1);
    c.insert(c.end(), cmds.begin(), cmds.end());
    write_corpus(c, dir.path);
    const auto back = load_corpus(dir.path);
    REQUIRE(back.size() == 12);
    int digits = 0;
    for (const auto& u : back)
        digits += u.digit >= 0;
    CHECK(digits == 10);
    CHECK(back[0].digit == 0);
    CHECK(back[2].digit == 2);
    CHECK(back[2].speaker == "spk00");
    CHECK(back[11].digit == -1);
}

TEST_CASE("loading errors")
{
    testutil::TempDir dir("corpus_empty");
    try {
        load_corpus(dir.path);
        FAIL("expected empty_dataset");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::empty_dataset);
    }
    try {
        load_corpus(dir.path / "nope");
        FAIL("expected missing_file");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::missing_file);
    }
    SyntheticCorpusSpec bad;
    bad.speakers = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}
