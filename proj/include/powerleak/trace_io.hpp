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

// Trace files. Two encodings:
//
//  * CSV with header `time_s,value`, one row per sample. The rate is
//    recovered from the time column.
//  * Raw little-endian float32 samples plus a JSON sidecar
//    (`<file>.json`: {"rate": .., "unit": "A", "length": ..}).

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "powerleak/channel.hpp"

namespace powerleak {

struct SeriesData {
    Eigen::VectorXd values;
    double rate = 0;
    std::string unit;
};

void write_series_csv(const Eigen::VectorXd& values, double rate, const std::filesystem::path& path);
SeriesData read_series_csv(const std::filesystem::path& path);

void write_series_raw(const Eigen::VectorXd& values, double rate, std::string_view unit,
                      const std::filesystem::path& path);
SeriesData read_series_raw(const std::filesystem::path& path);

template <typename Unit>
void write_trace_csv(const Trace<Unit>& trace, const std::filesystem::path& path)
{
    write_series_csv(trace.values, trace.rate, path);
}

template <typename Unit>
Trace<Unit> read_trace_csv(const std::filesystem::path& path)
{
    SeriesData s = read_series_csv(path);
    return Trace<Unit>(std::move(s.values), s.rate);
}

template <typename Unit>
void write_trace_raw(const Trace<Unit>& trace, const std::filesystem::path& path)
{
    write_series_raw(trace.values, trace.rate, Unit::symbol, path);
}

template <typename Unit>
Trace<Unit> read_trace_raw(const std::filesystem::path& path)
{
    SeriesData s = read_series_raw(path);
    require(s.unit == Unit::symbol, path.string() + ": sidecar unit '" + s.unit + "' does not match '" +
                                        std::string(Unit::symbol) + "'");
    return Trace<Unit>(std::move(s.values), s.rate);
}

} // namespace powerleak
