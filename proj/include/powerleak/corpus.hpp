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

// Audio corpora: a directory loader using the spoken-digit naming scheme
// `<digit>_<speaker>_<index>.wav`, and a seeded formant synthesiser that
// produces spoken digits and short command phrases when no recorded corpus is
// available.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "powerleak/signal.hpp"

namespace powerleak {

struct Utterance {
    AudioBuffer audio;
    int digit = -1; // -1 for non-digit speech
    std::string speaker;
    int index = 0;
    std::string text;

    /// `<digit>_<speaker>_<index>.wav`, or `cmd_<speaker>_<index>.wav` for
    /// non-digit speech.
    std::string file_name() const;
};

/// Loads every .wav in `dir`, sorted by file name. Digit labels come from
/// names of the form `<digit>_<speaker>_<index>.wav`; other names load with
/// digit = -1. Throws missing_file for a missing directory and empty_dataset
/// when no .wav files are found.
std::vector<Utterance> load_corpus(const std::filesystem::path& dir);

/// Writes each utterance under its file_name() as 16-bit PCM.
void write_corpus(const std::vector<Utterance>& corpus, const std::filesystem::path& dir);

struct SpeakerTraits {
    std::string name;
    bool female = false;
    double f0 = 120;            // Hz, mean pitch
    double formant_scale = 1.0; // vocal-tract length factor
    double rate = 1.0;          // > 1 speaks faster
    double breathiness = 0.1;   // aspiration mixed into voicing
    double pitch_range = 0.15;  // declination depth over an utterance
};

SpeakerTraits make_speaker(std::string name, std::uint64_t seed);

inline constexpr std::string_view kDigitWords[10] = {"zero", "one", "two",   "three", "four",
                                                     "five", "six", "seven", "eight", "nine"};

/// One word from the synthesiser lexicon (the ten digits plus a few command
/// words), without silence padding.
AudioBuffer synthesize_word(std::string_view word, const SpeakerTraits& speaker, std::uint64_t seed, double rate);

/// A spoken digit with random leading and trailing silence, light background
/// noise and a random peak level.
AudioBuffer synthesize_digit(int digit, const SpeakerTraits& speaker, std::uint64_t seed, double rate = 8000);

/// Words separated by short pauses, padded and levelled like synthesize_digit.
AudioBuffer synthesize_phrase(const std::vector<std::string>& words, const SpeakerTraits& speaker,
                              std::uint64_t seed, double rate = 16000);

struct SyntheticCorpusSpec {
    int speakers = 30;
    int repetitions = 5; // per digit per speaker
    std::uint64_t seed = 1;
    double rate = 8000;
    std::string speaker_prefix = "spk";

    void validate() const;
};

/// speakers x 10 digits x repetitions utterances, ordered by speaker, digit,
/// repetition.
std::vector<Utterance> synthetic_digit_corpus(const SyntheticCorpusSpec& spec);

/// `count` short command phrases ("hey ... call nine one one", ...) from
/// `speakers` synthetic speakers.
std::vector<Utterance> synthetic_command_corpus(int count, std::uint64_t seed, double rate = 16000,
                                                int speakers = 10);

} // namespace powerleak
