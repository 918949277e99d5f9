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

#include <Eigen/Core>

#include "powerleak/signal.hpp"

namespace powerleak {

inline constexpr Eigen::Index kFeatureSize = 130;
inline constexpr double kFeatureRate = 8000;
inline constexpr Eigen::Index kFeatureSamples = 8320; // 1.04 s at 8 kHz
inline constexpr double kFeatureBandHz = 2000;
inline constexpr StftParams kFeatureStft{256, 64, 512};
inline constexpr double kFeatureLogFloor = 1e-3; // relative to the peak magnitude

/// 130 x 130 log-spectrogram in [0, 1]. Rows are frequency (row 0 = 0 Hz,
/// row 129 = 2 kHz), columns are time.
struct Feature130 {
    Eigen::MatrixXf matrix;

    void validate() const;
};

/// resample to 8 kHz, centre pad/trim to 1.04 s, Hann STFT, keep 0-2 kHz,
/// log magnitude relative to the peak, bilinear resize to 130 x 130 and
/// min-max normalise. Throws degenerate_feature for silent input.
Feature130 featurize(const AudioBuffer& audio);

/// Centre pad (zeros) or centre trim to exactly `length` samples.
Eigen::VectorXd centre_fit(const Eigen::VectorXd& x, Eigen::Index length);

/// Bilinear resize with corner-aligned sampling grids.
Eigen::MatrixXd resize_bilinear(const Eigen::MatrixXd& in, Eigen::Index rows, Eigen::Index cols);

} // namespace powerleak
