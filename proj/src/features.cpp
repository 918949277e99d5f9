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

#include "powerleak/features.hpp"

namespace powerleak {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void Feature130::validate() const
{
    if (matrix.rows() != kFeatureSize || matrix.cols() != kFeatureSize)
        fail(Errc::shape_mismatch, "feature must be 130 x 130");
    require(matrix.allFinite() && matrix.minCoeff() >= 0, "feature values must be finite and non-negative");
}

VectorXd centre_fit(const VectorXd& x, Index length)
{
    require(length > 0, "target length must be positive");
    VectorXd out = VectorXd::Zero(length);
    if (x.size() >= length) {
        out = x.segment((x.size() - length) / 2, length);
    } else {
        out.segment((length - x.size()) / 2, x.size()) = x;
    }
    return out;
}

MatrixXd resize_bilinear(const MatrixXd& in, Index rows, Index cols)
{
    require(in.rows() >= 1 && in.cols() >= 1 && rows >= 1 && cols >= 1, "resize needs non-empty shapes");
    const auto grid = [](Index i, Index out_n, Index in_n) {
        return out_n == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(in_n - 1) / static_cast<double>(out_n - 1);
    };
    MatrixXd out(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const double y = grid(r, rows, in.rows());
        const Index y0 = std::min<Index>(static_cast<Index>(y), in.rows() - 1);
        const Index y1 = std::min<Index>(y0 + 1, in.rows() - 1);
        const double fy = y - static_cast<double>(y0);
        for (Index c = 0; c < cols; ++c) {
            const double x = grid(c, cols, in.cols());
            const Index x0 = std::min<Index>(static_cast<Index>(x), in.cols() - 1);
            const Index x1 = std::min<Index>(x0 + 1, in.cols() - 1);
            const double fx = x - static_cast<double>(x0);
            out(r, c) = (1 - fy) * ((1 - fx) * in(y0, x0) + fx * in(y0, x1)) +
                        fy * ((1 - fx) * in(y1, x0) + fx * in(y1, x1));
        }
    }
    return out;
}

Feature130 featurize(const AudioBuffer& audio)
{
    require(audio.size() > 0, "cannot featurize empty audio");
    const AudioBuffer at_rate = resample(audio, kFeatureRate);
    const AudioBuffer fitted(centre_fit(at_rate.samples, kFeatureSamples), kFeatureRate);

    const Spectrogram spec = magnitude(stft_complex(fitted, kFeatureStft));
    const auto band_bins = static_cast<Index>(std::floor(kFeatureBandHz / spec.bin_width)) + 1;

    // frequency x time
    MatrixXd band = spec.magnitudes.leftCols(band_bins).transpose();
    const double peak = band.maxCoeff();
    if (!(peak > 0))
        fail(Errc::degenerate_feature, "no energy below 2 kHz");
    band = (band.array() / peak + kFeatureLogFloor).log10().matrix();

    MatrixXd resized = resize_bilinear(band, kFeatureSize, kFeatureSize);
    const double lo = resized.minCoeff();
    const double hi = resized.maxCoeff();
    if (!(hi > lo))
        fail(Errc::degenerate_feature, "flat spectrogram");
    Feature130 f;
    f.matrix = ((resized.array() - lo) / (hi - lo)).cast<float>().matrix();
    return f;
}

} // namespace powerleak
