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

// Spoken-digit CNN:
//
//   input 130x130 -> conv 3x3 (16) -> ReLU -> maxpool 2x2
//                 -> conv 3x3 (32) -> ReLU -> maxpool 2x2
//                 -> dense 128 -> ReLU -> dropout
//                 -> dense 64  -> ReLU -> dropout
//                 -> dense 10  -> softmax
//
// Convolutions are 'valid' with stride 1 and run as im2col + GEMM. The model
// is templated on the scalar type: training runs in float, gradient checks
// in double.

#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "powerleak/error.hpp"

namespace powerleak {

struct CnnArchitecture {
    Eigen::Index input = 130;
    Eigen::Index conv1_filters = 16;
    Eigen::Index conv2_filters = 32;
    Eigen::Index kernel = 3;
    Eigen::Index dense1 = 128;
    Eigen::Index dense2 = 64;
    Eigen::Index classes = 10;

    Eigen::Index conv1_out() const { return input - kernel + 1; }
    Eigen::Index pool1_out() const { return conv1_out() / 2; }
    Eigen::Index conv2_out() const { return pool1_out() - kernel + 1; }
    Eigen::Index pool2_out() const { return conv2_out() / 2; }
    Eigen::Index flat() const { return conv2_filters * pool2_out() * pool2_out(); }

    void validate() const;
    bool operator==(const CnnArchitecture&) const = default;
};

enum class LayerTensor : int {
    conv1_w,
    conv1_b,
    conv2_w,
    conv2_b,
    dense1_w,
    dense1_b,
    dense2_w,
    dense2_b,
    out_w,
    out_b,
};
inline constexpr int kTensorCount = 10;

const char* tensor_name(LayerTensor t);

/// 2x2 non-overlapping max pooling over channel images stored as rows of a
/// (channels x height*width) matrix. Odd trailing rows/columns are dropped.
/// `argmax` receives the winning input position for every output.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>
max_pool2x2(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& act, Eigen::Index height,
            Eigen::Index width, std::vector<int>& argmax);

template <typename Scalar>
class Cnn {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Tensors = std::array<Matrix, kTensorCount>;

    Cnn() = default;
    /// All-zero weights with the given shapes.
    explicit Cnn(const CnnArchitecture& arch);
    /// He-normal weights, zero biases.
    static Cnn initialized(const CnnArchitecture& arch, std::uint64_t seed);

    const CnnArchitecture& architecture() const { return arch_; }
    Tensors& tensors() { return tensors_; }
    const Tensors& tensors() const { return tensors_; }
    Matrix& tensor(LayerTensor t) { return tensors_[static_cast<int>(t)]; }
    const Matrix& tensor(LayerTensor t) const { return tensors_[static_cast<int>(t)]; }

    /// Zero tensors shaped like this model's parameters.
    Tensors zero_like() const;

    template <typename Other>
    Cnn<Other> cast() const
    {
        Cnn<Other> out(arch_);
        out.dropout_rate = dropout_rate;
        for (int i = 0; i < kTensorCount; ++i)
            out.tensors()[i] = tensors_[i].template cast<Other>();
        return out;
    }

    /// Inference (no dropout). Throws shape_mismatch for a wrong input shape.
    /// When `pattern` is given it receives a hash of every ReLU gate and
    /// max-pool choice, so callers can tell whether two evaluations lie on
    /// the same smooth piece of the network function.
    Vector logits(const Matrix& input, std::uint64_t* pattern = nullptr) const;

    /// Mean cross-entropy over the batch; adds d(loss)/d(theta) into `grads`.
    /// Dropout is applied only when `dropout_rng` is non-null.
    double loss_and_gradient(std::span<const Matrix* const> inputs, std::span<const int> labels, Tensors& grads,
                             std::mt19937_64* dropout_rng) const;

    /// Loss only, dropout off.
    double loss(std::span<const Matrix* const> inputs, std::span<const int> labels,
                std::uint64_t* pattern = nullptr) const;

    double dropout_rate = 0.5;

private:
    struct SampleCache;

    Vector conv_forward(const Matrix& input, SampleCache* cache, std::uint64_t* pattern = nullptr) const;
    void conv_backward(const SampleCache& cache, const Vector& d_flat, Tensors& grads) const;
    void check_input(const Matrix& input) const;

    CnnArchitecture arch_;
    Tensors tensors_;
};

extern template class Cnn<float>;
extern template class Cnn<double>;

/// Numerically stable softmax.
template <typename Derived>
Eigen::VectorXd softmax(const Eigen::MatrixBase<Derived>& logits)
{
    const Eigen::VectorXd z = logits.template cast<double>();
    const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
    return e / e.sum();
}

} // namespace powerleak
