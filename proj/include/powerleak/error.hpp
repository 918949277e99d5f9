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

#include <stdexcept>
#include <string>
#include <string_view>

namespace powerleak {

enum class Errc {
    invalid_argument,
    missing_file,
    malformed_header,
    unsupported_encoding,
    unwritable_path,
    io_error,
    zero_noise_power,
    negative_voltage,
    degenerate_trace,
    too_short,
    geometry_mismatch,
    shape_mismatch,
    degenerate_feature,
    empty_dataset,
    empty_class,
    divergence,
};

std::string_view to_string(Errc code);
// Identifier form, e.g. "negative_voltage", for report keys.
std::string_view code_name(Errc code);

// Validation errors are caller mistakes (bad config, bad input); everything
// else is a runtime failure. The CLI maps the two onto different exit codes.
bool is_validation_error(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what);
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

inline void require(bool ok, const std::string& what, Errc code = Errc::invalid_argument)
{
    if (!ok)
        fail(code, what);
}

} // namespace powerleak
