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

#include "powerleak/error.hpp"

namespace powerleak {

std::string_view to_string(Errc code)
{
    switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::missing_file: return "missing file";
    case Errc::malformed_header: return "malformed header";
    case Errc::unsupported_encoding: return "unsupported encoding";
    case Errc::unwritable_path: return "unwritable path";
    case Errc::io_error: return "i/o error";
    case Errc::zero_noise_power: return "zero noise power";
    case Errc::negative_voltage: return "negative voltage";
    case Errc::degenerate_trace: return "degenerate trace";
    case Errc::too_short: return "input too short";
    case Errc::geometry_mismatch: return "geometry mismatch";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::degenerate_feature: return "degenerate feature";
    case Errc::empty_dataset: return "empty dataset";
    case Errc::empty_class: return "empty class";
    case Errc::divergence: return "training diverged";
    }
    return "unknown error";
}

std::string_view code_name(Errc code)
{
    switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::missing_file: return "missing_file";
    case Errc::malformed_header: return "malformed_header";
    case Errc::unsupported_encoding: return "unsupported_encoding";
    case Errc::unwritable_path: return "unwritable_path";
    case Errc::io_error: return "io_error";
    case Errc::zero_noise_power: return "zero_noise_power";
    case Errc::negative_voltage: return "negative_voltage";
    case Errc::degenerate_trace: return "degenerate_trace";
    case Errc::too_short: return "too_short";
    case Errc::geometry_mismatch: return "geometry_mismatch";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::degenerate_feature: return "degenerate_feature";
    case Errc::empty_dataset: return "empty_dataset";
    case Errc::empty_class: return "empty_class";
    case Errc::divergence: return "divergence";
    }
    return "unknown";
}

bool is_validation_error(Errc code)
{
    switch (code) {
    case Errc::io_error:
    case Errc::unwritable_path:
    case Errc::divergence:
        return false;
    default:
        return true;
    }
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
{
}

void fail(Errc code, const std::string& what)
{
    throw Error(code, what);
}

} // namespace powerleak
