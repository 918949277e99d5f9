#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>

#include <unistd.h>

#include "powerleak/signal.hpp"

namespace testutil {

inline powerleak::AudioBuffer tone(double freq, double rate, double seconds, double amp = 0.5)
{
    const auto n = static_cast<Eigen::Index>(seconds * rate);
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i)
        x[i] = amp * std::sin(2 * std::numbers::pi * freq * static_cast<double>(i) / rate);
    return {x, rate};
}

// Linear chirp f0 -> f1 over the clip.
inline powerleak::AudioBuffer chirp(double f0, double f1, double rate, double seconds, double amp = 0.5)
{
    const auto n = static_cast<Eigen::Index>(seconds * rate);
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        x[i] = amp * std::sin(2 * std::numbers::pi * (f0 * t + 0.5 * (f1 - f0) / seconds * t * t));
    }
    return {x, rate};
}

// Fresh directory under the system temp dir, removed on scope exit.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag)
        : path(std::filesystem::temp_directory_path() / ("powerleak_" + tag + "_" + std::to_string(::getpid())))
    {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

} // namespace testutil
