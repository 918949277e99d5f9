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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace powerleak {

enum class SpeakerLayout { single, dual };

/// Per-phone parameters. The SNR and accuracy fields are measured reference
/// values used as simulation targets and for reporting, not model outputs.
struct DeviceProfile {
    std::string name;
    std::string port;              // "lightning" or "usb-c"
    double f_s = 48000;            // microphone sampling rate, Hz
    double injection_snr_db = 0;   // reference recorded SNR of injected audio
    double leaked_snr_db = 0;      // reference SNR of audio leaked into the charging current
    SpeakerLayout speakers = SpeakerLayout::single;
    double accuracy_ref = 0;       // reference digit accuracy, fraction

    void validate() const;
};

/// Registry text in an INI-like layout:
///
///   [Honor 10]
///   sampling_rate_hz = 48000
///   injection_snr_db = 20.4
///   ...
std::vector<DeviceProfile> parse_device_registry(std::string_view text);
std::vector<DeviceProfile> load_device_registry(const std::filesystem::path& path);
std::string format_device_registry(const std::vector<DeviceProfile>& devices);

/// The nine phones shipped with the toolkit.
const std::vector<DeviceProfile>& builtin_devices();

/// Case-insensitive lookup; throws invalid_argument for unknown names.
const DeviceProfile& find_device(const std::vector<DeviceProfile>& devices, std::string_view name);

} // namespace powerleak
