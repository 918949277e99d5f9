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

#include "powerleak/devices.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "powerleak/config_text.hpp"
#include "powerleak/error.hpp"

namespace powerleak {

namespace text {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string_view s)
{
    std::string out(s);
    for (char& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> split_list(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto next = s.find(sep, pos);
        const auto item = trim(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (!item.empty())
            out.push_back(item);
        if (next == std::string_view::npos)
            break;
        pos = next + 1;
    }
    return out;
}

std::vector<Section> parse_sections(std::string_view input)
{
    std::vector<Section> sections(1);
    std::istringstream in{std::string(input)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty())
            continue;
        if (line.front() == '[') {
            require(line.back() == ']', "line " + std::to_string(line_no) + ": unterminated section header");
            Section s;
            s.name = trim(std::string_view(line).substr(1, line.size() - 2));
            s.line = line_no;
            sections.push_back(std::move(s));
            continue;
        }
        const auto eq = line.find('=');
        require(eq != std::string::npos, "line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = lower(trim(std::string_view(line).substr(0, eq)));
        require(!key.empty(), "line " + std::to_string(line_no) + ": empty key");
        sections.back().values[key] = trim(std::string_view(line).substr(eq + 1));
    }
    return sections;
}

double to_double(const std::string& s, std::string_view key)
{
    double v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v))
        fail(Errc::invalid_argument, std::string(key) + ": expected a number, got '" + s + "'");
    return v;
}

long long to_int(const std::string& s, std::string_view key)
{
    long long v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end)
        fail(Errc::invalid_argument, std::string(key) + ": expected an integer, got '" + s + "'");
    return v;
}

bool to_bool(const std::string& s, std::string_view key)
{
    const std::string v = lower(s);
    if (v == "true" || v == "yes" || v == "on" || v == "1")
        return true;
    if (v == "false" || v == "no" || v == "off" || v == "0")
        return false;
    fail(Errc::invalid_argument, std::string(key) + ": expected a boolean, got '" + s + "'");
}

std::string format_double(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace text

namespace {

constexpr std::string_view kBuiltinRegistry = R"(
[iPhone 5s]
port = lightning
sampling_rate_hz = 44100
injection_snr_db = 19.7
leaked_snr_db = 5.41
speakers = single
accuracy_ref = 0.930

[iPhone X]
port = lightning
sampling_rate_hz = 48000
injection_snr_db = 21.3
leaked_snr_db = 4.75
speakers = dual
accuracy_ref = 0.927

[Honor 10]
port = usb-c
sampling_rate_hz = 48000
injection_snr_db = 20.4
leaked_snr_db = 5.75
speakers = single
accuracy_ref = 0.933

[MI 8 Lite]
port = usb-c
sampling_rate_hz = 44100
injection_snr_db = 18.9
leaked_snr_db = 4.93
speakers = single
accuracy_ref = 0.927

[Pocophone]
port = usb-c
sampling_rate_hz = 48000
injection_snr_db = 21.8
leaked_snr_db = 1.51
speakers = dual
accuracy_ref = 0.360

[Note 10]
port = usb-c
sampling_rate_hz = 44100
injection_snr_db = 21.2
leaked_snr_db = 4.46
speakers = dual
accuracy_ref = 0.910

[Galaxy S9]
port = usb-c
sampling_rate_hz = 44100
injection_snr_db = 20.1
leaked_snr_db = 4.21
speakers = dual
accuracy_ref = 0.907

[Pixel 1]
port = usb-c
sampling_rate_hz = 44100
injection_snr_db = 19.3
leaked_snr_db = 3.83
speakers = single
accuracy_ref = 0.897

[Pixel 4XL]
port = usb-c
sampling_rate_hz = 32000
injection_snr_db = 15.4
leaked_snr_db = 3.72
speakers = dual
accuracy_ref = 0.900
)";

const std::string& value_of(const text::Section& s, const std::string& key)
{
    const auto it = s.values.find(key);
    if (it == s.values.end())
        fail(Errc::invalid_argument, "device '" + s.name + "': missing key '" + key + "'");
    return it->second;
}

} // namespace

void DeviceProfile::validate() const
{
    require(!name.empty(), "device name must not be empty");
    require(f_s == 32000 || f_s == 44100 || f_s == 48000,
            "device '" + name + "': sampling rate must be 32000, 44100 or 48000 Hz");
    require(std::isfinite(leaked_snr_db) && std::isfinite(injection_snr_db),
            "device '" + name + "': SNR values must be finite");
    require(accuracy_ref >= 0 && accuracy_ref <= 1, "device '" + name + "': accuracy_ref must be a fraction");
}

std::vector<DeviceProfile> parse_device_registry(std::string_view registry)
{
    std::vector<DeviceProfile> devices;
    for (const auto& s : text::parse_sections(registry)) {
        if (s.name.empty()) {
            require(s.values.empty(), "device registry: keys outside a [device] section");
            continue;
        }
        DeviceProfile d;
        d.name = s.name;
        d.port = s.values.contains("port") ? s.values.at("port") : "usb-c";
        d.f_s = text::to_double(value_of(s, "sampling_rate_hz"), "sampling_rate_hz");
        d.injection_snr_db = text::to_double(value_of(s, "injection_snr_db"), "injection_snr_db");
        d.leaked_snr_db = text::to_double(value_of(s, "leaked_snr_db"), "leaked_snr_db");
        const std::string layout = text::lower(value_of(s, "speakers"));
        require(layout == "single" || layout == "dual", "device '" + s.name + "': speakers must be single or dual");
        d.speakers = layout == "dual" ? SpeakerLayout::dual : SpeakerLayout::single;
        d.accuracy_ref = text::to_double(value_of(s, "accuracy_ref"), "accuracy_ref");
        d.validate();
        for (const auto& other : devices)
            require(text::lower(other.name) != text::lower(d.name), "duplicate device '" + d.name + "'");
        devices.push_back(std::move(d));
    }
    require(!devices.empty(), "device registry is empty");
    return devices;
}

std::vector<DeviceProfile> load_device_registry(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        fail(Errc::missing_file, path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_device_registry(ss.str());
}

std::string format_device_registry(const std::vector<DeviceProfile>& devices)
{
    std::ostringstream out;
    for (const auto& d : devices) {
        out << '[' << d.name << "]\n"
            << "port = " << d.port << '\n'
            << "sampling_rate_hz = " << text::format_double(d.f_s) << '\n'
            << "injection_snr_db = " << text::format_double(d.injection_snr_db) << '\n'
            << "leaked_snr_db = " << text::format_double(d.leaked_snr_db) << '\n'
            << "speakers = " << (d.speakers == SpeakerLayout::dual ? "dual" : "single") << '\n'
            << "accuracy_ref = " << text::format_double(d.accuracy_ref) << "\n\n";
    }
    return out.str();
}

const std::vector<DeviceProfile>& builtin_devices()
{
    static const std::vector<DeviceProfile> devices = parse_device_registry(kBuiltinRegistry);
    return devices;
}

const DeviceProfile& find_device(const std::vector<DeviceProfile>& devices, std::string_view name)
{
    const std::string key = text::lower(text::trim(name));
    for (const auto& d : devices)
        if (text::lower(d.name) == key)
            return d;
    fail(Errc::invalid_argument, "unknown device profile '" + std::string(name) + "'");
}

} // namespace powerleak
