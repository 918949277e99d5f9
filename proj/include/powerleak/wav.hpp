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

#pragma once

#include <cstddef>
#include <filesystem>

#include "powerleak/signal.hpp"

namespace powerleak {

enum class WavDepth { pcm16, float32 };

/// Reads RIFF/WAVE files holding PCM integers (8/16/24/32 bit) or IEEE
/// floats (32/64 bit). Multi-channel audio is averaged down to mono.
/// Errors: missing_file, malformed_header, unsupported_encoding.
AudioBuffer load_wav(const std::filesystem::path& path);

/// Writes mono audio. Samples outside [-1, 1] are clipped; the number of
/// clipped samples is returned. Throws unwritable_path.
std::size_t save_wav(const AudioBuffer& buffer, const std::filesystem::path& path,
                     WavDepth depth = WavDepth::pcm16);

} // namespace powerleak
