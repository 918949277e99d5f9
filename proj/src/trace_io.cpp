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

#include "powerleak/trace_io.hpp"

#include <json.hpp>

#include <fstream>
#include <vector>

#include "powerleak/config_text.hpp"

namespace powerleak {

namespace fs = std::filesystem;

void write_series_csv(const Eigen::VectorXd& values, double rate, const fs::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        fail(Errc::unwritable_path, path.string());
    out << "time_s,value\n";
    for (Eigen::Index i = 0; i < values.size(); ++i)
        out << text::format_double(static_cast<double>(i) / rate) << ',' << text::format_double(values[i]) << '\n';
    if (!out)
        fail(Errc::io_error, path.string());
}

SeriesData read_series_csv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        fail(Errc::missing_file, path.string());
    std::string line;
    if (!std::getline(in, line) || text::trim(line) != "time_s,value")
        fail(Errc::malformed_header, path.string() + ": expected header 'time_s,value'");

    std::vector<double> times, values;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (text::trim(line).empty())
            continue;
        const auto cols = text::split_list(line);
        if (cols.size() != 2)
            fail(Errc::malformed_header, path.string() + ": row " + std::to_string(row) + " needs two columns");
        times.push_back(text::to_double(cols[0], "time_s"));
        values.push_back(text::to_double(cols[1], "value"));
    }
    if (times.size() < 2)
        fail(Errc::too_short, path.string() + ": need at least two samples to infer the rate");

    const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    require(dt > 0, path.string() + ": time column must increase");
    SeriesData s;
    s.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    // Rates are integral in every file we write; snap away formatting noise.
    const double rate = 1.0 / dt;
    s.rate = std::abs(rate - std::round(rate)) < 1e-6 * rate ? std::round(rate) : rate;
    return s;
}

void write_series_raw(const Eigen::VectorXd& values, double rate, std::string_view unit, const fs::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(Errc::unwritable_path, path.string());
    const Eigen::VectorXf f = values.cast<float>();
    out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));

    nlohmann::ordered_json desc;
    desc["rate"] = rate;
    desc["unit"] = std::string(unit);
    desc["length"] = values.size();
    desc["encoding"] = "float32-le";
    std::ofstream side(fs::path(path.string() + ".json"), std::ios::trunc);
    if (!side)
        fail(Errc::unwritable_path, path.string() + ".json");
    side << desc.dump(2) << '\n';
}

SeriesData read_series_raw(const fs::path& path)
{
    const fs::path side_path(path.string() + ".json");
    std::ifstream side(side_path);
    if (!side)
        fail(Errc::missing_file, side_path.string());
    nlohmann::json desc;
    try {
        side >> desc;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::malformed_header, side_path.string() + ": " + e.what());
    }
    if (!desc.contains("rate") || !desc.contains("unit") || !desc.contains("length"))
        fail(Errc::malformed_header, side_path.string() + ": needs rate, unit and length");

    SeriesData s;
    s.rate = desc["rate"].get<double>();
    s.unit = desc["unit"].get<std::string>();
    const auto length = desc["length"].get<Eigen::Index>();

    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Errc::missing_file, path.string());
    Eigen::VectorXf f(length);
    in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(length * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(length * sizeof(float)))
        fail(Errc::malformed_header, path.string() + ": fewer samples than the sidecar declares");
    s.values = f.cast<double>();
    return s;
}

} // namespace powerleak
