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

// Helpers for the small `key = value` text formats used by the device
// registry and experiment configs. '#' starts a comment; `[name]` opens a
// section.

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace powerleak::text {

struct Section {
    std::string name; // empty for keys before the first header
    std::map<std::string, std::string> values;
    int line = 0;
};

std::vector<Section> parse_sections(std::string_view text);

std::string trim(std::string_view s);
std::string lower(std::string_view s);
std::vector<std::string> split_list(std::string_view s, char sep = ',');

double to_double(const std::string& s, std::string_view key);
long long to_int(const std::string& s, std::string_view key);
bool to_bool(const std::string& s, std::string_view key);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

} // namespace powerleak::text
