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

#include "powerleak/wav.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace powerleak {

namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::uint8_t* p)
{
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

struct Format {
    std::uint16_t tag = 0;
    std::uint16_t channels = 0;
    std::uint32_t rate = 0;
    std::uint16_t bits = 0;
};

double decode_sample(const std::uint8_t* p, const Format& fmt)
{
    if (fmt.tag == kFormatFloat) {
        if (fmt.bits == 32)
            return read_le<float>(p);
        return read_le<double>(p);
    }
    switch (fmt.bits) {
    case 8:
        return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16:
        return read_le<std::int16_t>(p) / 32768.0;
    case 24: {
        std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
        if (v & 0x800000)
            v -= 0x1000000;
        return v / 8388608.0;
    }
    default:
        return read_le<std::int32_t>(p) / 2147483648.0;
    }
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T v)
{
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

} // namespace

AudioBuffer load_wav(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Errc::missing_file, path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        fail(Errc::malformed_header, path.string() + ": not a RIFF/WAVE file");

    Format fmt;
    bool have_fmt = false;
    const std::uint8_t* data = nullptr;
    std::size_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint8_t* chunk = bytes.data() + pos;
        const auto len = read_le<std::uint32_t>(chunk + 4);
        const std::size_t body = pos + 8;
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (len < 16 || body + len > bytes.size())
                fail(Errc::malformed_header, path.string() + ": truncated fmt chunk");
            fmt.tag = read_le<std::uint16_t>(chunk + 8);
            fmt.channels = read_le<std::uint16_t>(chunk + 10);
            fmt.rate = read_le<std::uint32_t>(chunk + 12);
            fmt.bits = read_le<std::uint16_t>(chunk + 22);
            if (fmt.tag == kFormatExtensible) {
                if (len < 40)
                    fail(Errc::malformed_header, path.string() + ": truncated extensible fmt chunk");
                fmt.tag = read_le<std::uint16_t>(chunk + 8 + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = bytes.data() + body;
            // Tolerate writers that leave a placeholder length on streams.
            data_len = std::min<std::size_t>(len, bytes.size() - body);
            break;
        }
        pos = body + len + (len & 1u);
    }

    if (!have_fmt || data == nullptr)
        fail(Errc::malformed_header, path.string() + ": missing fmt or data chunk");
    if (fmt.channels == 0 || fmt.rate == 0)
        fail(Errc::malformed_header, path.string() + ": zero channels or sample rate");

    const bool pcm_ok = fmt.tag == kFormatPcm &&
                        (fmt.bits == 8 || fmt.bits == 16 || fmt.bits == 24 || fmt.bits == 32);
    const bool float_ok = fmt.tag == kFormatFloat && (fmt.bits == 32 || fmt.bits == 64);
    if (!pcm_ok && !float_ok)
        fail(Errc::unsupported_encoding, path.string() + ": format tag " + std::to_string(fmt.tag) +
                                             ", " + std::to_string(fmt.bits) + " bits");

    const std::size_t bytes_per_sample = fmt.bits / 8;
    const std::size_t frame_bytes = bytes_per_sample * fmt.channels;
    const std::size_t frames = data_len / frame_bytes;

    Eigen::VectorXd samples(static_cast<Eigen::Index>(frames));
    for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0;
        for (std::size_t c = 0; c < fmt.channels; ++c)
            acc += decode_sample(data + f * frame_bytes + c * bytes_per_sample, fmt);
        samples[static_cast<Eigen::Index>(f)] = acc / fmt.channels;
    }
    if (!samples.allFinite())
        fail(Errc::unsupported_encoding, path.string() + ": non-finite float samples");
    return AudioBuffer(std::move(samples), fmt.rate);
}

std::size_t save_wav(const AudioBuffer& buffer, const std::filesystem::path& path, WavDepth depth)
{
    const bool is_float = depth == WavDepth::float32;
    const std::uint16_t bits = is_float ? 32 : 16;
    const std::uint16_t block_align = bits / 8;
    const auto rate = static_cast<std::uint32_t>(std::lround(buffer.rate));
    const auto data_len = static_cast<std::uint32_t>(buffer.size() * block_align);

    std::vector<std::uint8_t> out;
    out.reserve(44 + data_len);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put<std::uint32_t>(out, 36 + data_len);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put<std::uint32_t>(out, 16);
    put<std::uint16_t>(out, is_float ? kFormatFloat : kFormatPcm);
    put<std::uint16_t>(out, 1);
    put<std::uint32_t>(out, rate);
    put<std::uint32_t>(out, rate * block_align);
    put<std::uint16_t>(out, block_align);
    put<std::uint16_t>(out, bits);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put<std::uint32_t>(out, data_len);

    std::size_t clipped = 0;
    for (Eigen::Index i = 0; i < buffer.size(); ++i) {
        double v = buffer.samples[i];
        if (v > 1.0 || v < -1.0) {
            ++clipped;
            v = std::clamp(v, -1.0, 1.0);
        }
        if (is_float) {
            put<float>(out, static_cast<float>(v));
        } else {
            const long q = std::clamp(std::lround(v * 32768.0), -32768L, 32767L);
            put<std::int16_t>(out, static_cast<std::int16_t>(q));
        }
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file)
        fail(Errc::unwritable_path, path.string());
    file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!file)
        fail(Errc::unwritable_path, path.string());
    return clipped;
}

} // namespace powerleak
