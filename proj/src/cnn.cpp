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

#include "powerleak/cnn.hpp"

#include <cmath>

#include "powerleak/random.hpp"

namespace powerleak {

using Eigen::Index;

void CnnArchitecture::validate() const
{
    require(input >= 4 && kernel >= 1 && conv1_filters >= 1 && conv2_filters >= 1 && dense1 >= 1 && dense2 >= 1 &&
                classes >= 2,
            "invalid CNN architecture");
    require(pool2_out() >= 1, "CNN input too small for two conv/pool stages");
}

const char* tensor_name(LayerTensor t)
{
    switch (t) {
    case LayerTensor::conv1_w: return "conv1.weight";
    case LayerTensor::conv1_b: return "conv1.bias";
    case LayerTensor::conv2_w: return "conv2.weight";
    case LayerTensor::conv2_b: return "conv2.bias";
    case LayerTensor::dense1_w: return "dense1.weight";
    case LayerTensor::dense1_b: return "dense1.bias";
    case LayerTensor::dense2_w: return "dense2.weight";
    case LayerTensor::dense2_b: return "dense2.bias";
    case LayerTensor::out_w: return "out.weight";
    case LayerTensor::out_b: return "out.bias";
    }
    return "?";
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>
max_pool2x2(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& act, Index height, Index width,
            std::vector<int>& argmax)
{
    const Index ph = height / 2, pw = width / 2, channels = act.rows();
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(channels, ph * pw);
    argmax.assign(static_cast<size_t>(channels * ph * pw), 0);
    for (Index oy = 0; oy < ph; ++oy) {
        for (Index ox = 0; ox < pw; ++ox) {
            const Index o = oy * pw + ox;
            const Index p00 = (2 * oy) * width + 2 * ox;
            const Index cand[4] = {p00, p00 + 1, p00 + width, p00 + width + 1};
            for (Index c = 0; c < channels; ++c) {
                Index best = cand[0];
                Scalar v = act(c, best);
                for (int j = 1; j < 4; ++j) {
                    if (act(c, cand[j]) > v) {
                        v = act(c, cand[j]);
                        best = cand[j];
                    }
                }
                out(c, o) = v;
                argmax[static_cast<size_t>(o * channels + c)] = static_cast<int>(best);
            }
        }
    }
    return out;
}

template Eigen::MatrixXf max_pool2x2<float>(const Eigen::MatrixXf&, Index, Index, std::vector<int>&);
template Eigen::MatrixXd max_pool2x2<double>(const Eigen::MatrixXd&, Index, Index, std::vector<int>&);

namespace {

// Column (oy*wo + ox) holds the k x k patch at (oy, ox) across all channels;
// row index is c*k*k + ky*k + kx.
template <typename Matrix>
Matrix im2col(const Matrix& act, Index height, Index width, Index k)
{
    const Index ho = height - k + 1, wo = width - k + 1, channels = act.rows();
    Matrix cols(channels * k * k, ho * wo);
    for (Index oy = 0; oy < ho; ++oy) {
        for (Index ox = 0; ox < wo; ++ox) {
            const Index col = oy * wo + ox;
            for (Index c = 0; c < channels; ++c)
                for (Index ky = 0; ky < k; ++ky)
                    for (Index kx = 0; kx < k; ++kx)
                        cols(c * k * k + ky * k + kx, col) = act(c, (oy + ky) * width + ox + kx);
        }
    }
    return cols;
}

template <typename Matrix>
Matrix col2im(const Matrix& cols, Index channels, Index height, Index width, Index k)
{
    const Index ho = height - k + 1, wo = width - k + 1;
    Matrix act = Matrix::Zero(channels, height * width);
    for (Index oy = 0; oy < ho; ++oy) {
        for (Index ox = 0; ox < wo; ++ox) {
            const Index col = oy * wo + ox;
            for (Index c = 0; c < channels; ++c)
                for (Index ky = 0; ky < k; ++ky)
                    for (Index kx = 0; kx < k; ++kx)
                        act(c, (oy + ky) * width + ox + kx) += cols(c * k * k + ky * k + kx, col);
        }
    }
    return act;
}

template <typename Matrix>
Matrix unpool(const Matrix& d_pooled, const std::vector<int>& argmax, Index in_positions)
{
    const Index channels = d_pooled.rows();
    Matrix d = Matrix::Zero(channels, in_positions);
    for (Index o = 0; o < d_pooled.cols(); ++o)
        for (Index c = 0; c < channels; ++c)
            d(c, argmax[static_cast<size_t>(o * channels + c)]) += d_pooled(c, o);
    return d;
}

template <typename Matrix>
std::uint64_t hash_gates(const Matrix& act, std::uint64_t h)
{
    for (Index i = 0; i < act.size(); ++i) {
        h ^= act.data()[i] > 0 ? 1u : 0u;
        h *= 0x100000001B3ull;
    }
    return h;
}

std::uint64_t hash_choices(const std::vector<int>& arg, std::uint64_t h)
{
    for (int a : arg) {
        h ^= static_cast<std::uint64_t>(a);
        h *= 0x100000001B3ull;
    }
    return h;
}

} // namespace

template <typename Scalar>
struct Cnn<Scalar>::SampleCache {
    Matrix cols1;
    Matrix act1; // post-ReLU
    std::vector<int> arg1;
    Matrix cols2;
    Matrix act2;
    std::vector<int> arg2;
};

template <typename Scalar>
Cnn<Scalar>::Cnn(const CnnArchitecture& arch) : arch_(arch)
{
    arch_.validate();
    const Index k2 = arch.kernel * arch.kernel;
    auto& t = tensors_;
    t[0] = Matrix::Zero(arch.conv1_filters, k2);
    t[1] = Matrix::Zero(arch.conv1_filters, 1);
    t[2] = Matrix::Zero(arch.conv2_filters, arch.conv1_filters * k2);
    t[3] = Matrix::Zero(arch.conv2_filters, 1);
    t[4] = Matrix::Zero(arch.dense1, arch.flat());
    t[5] = Matrix::Zero(arch.dense1, 1);
    t[6] = Matrix::Zero(arch.dense2, arch.dense1);
    t[7] = Matrix::Zero(arch.dense2, 1);
    t[8] = Matrix::Zero(arch.classes, arch.dense2);
    t[9] = Matrix::Zero(arch.classes, 1);
}

template <typename Scalar>
Cnn<Scalar> Cnn<Scalar>::initialized(const CnnArchitecture& arch, std::uint64_t seed)
{
    Cnn net(arch);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < kTensorCount; i += 2) {
        Matrix& w = net.tensors_[i];
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(w.cols())));
        for (Index c = 0; c < w.cols(); ++c)
            for (Index r = 0; r < w.rows(); ++r)
                w(r, c) = static_cast<Scalar>(dist(rng));
    }
    return net;
}

template <typename Scalar>
typename Cnn<Scalar>::Tensors Cnn<Scalar>::zero_like() const
{
    Tensors z;
    for (int i = 0; i < kTensorCount; ++i)
        z[i] = Matrix::Zero(tensors_[i].rows(), tensors_[i].cols());
    return z;
}

template <typename Scalar>
void Cnn<Scalar>::check_input(const Matrix& input) const
{
    if (input.rows() != arch_.input || input.cols() != arch_.input)
        fail(Errc::shape_mismatch, "CNN input must be " + std::to_string(arch_.input) + " x " +
                                       std::to_string(arch_.input) + ", got " + std::to_string(input.rows()) +
                                       " x " + std::to_string(input.cols()));
    if (tensors_[0].size() == 0)
        fail(Errc::shape_mismatch, "model has no weights");
}

template <typename Scalar>
typename Cnn<Scalar>::Vector Cnn<Scalar>::conv_forward(const Matrix& input, SampleCache* cache,
                                                       std::uint64_t* pattern) const
{
    const Index n = arch_.input, k = arch_.kernel;
    // single channel, positions in row-major order. Features live in [0, 1];
    // centring them on zero keeps the first-layer pre-activations from all
    // sharing one sign.
    Matrix image(1, n * n);
    for (Index y = 0; y < n; ++y)
        for (Index x = 0; x < n; ++x)
            image(0, y * n + x) = input(y, x) - Scalar(0.5);

    Matrix cols1 = im2col(image, n, n, k);
    Matrix act1 = ((tensors_[0] * cols1).colwise() + tensors_[1].col(0)).cwiseMax(Scalar(0));
    std::vector<int> arg1;
    const Index c1 = arch_.conv1_out();
    Matrix pool1 = max_pool2x2(act1, c1, c1, arg1);

    const Index p1 = arch_.pool1_out();
    Matrix cols2 = im2col(pool1, p1, p1, k);
    Matrix act2 = ((tensors_[2] * cols2).colwise() + tensors_[3].col(0)).cwiseMax(Scalar(0));
    std::vector<int> arg2;
    const Index c2 = arch_.conv2_out();
    Matrix pool2 = max_pool2x2(act2, c2, c2, arg2);

    Vector flat = Eigen::Map<const Vector>(pool2.data(), pool2.size());
    if (pattern) {
        *pattern = hash_gates(act1, *pattern);
        *pattern = hash_choices(arg1, *pattern);
        *pattern = hash_gates(act2, *pattern);
        *pattern = hash_choices(arg2, *pattern);
    }
    if (cache) {
        cache->cols1 = std::move(cols1);
        cache->act1 = std::move(act1);
        cache->arg1 = std::move(arg1);
        cache->cols2 = std::move(cols2);
        cache->act2 = std::move(act2);
        cache->arg2 = std::move(arg2);
    }
    return flat;
}

template <typename Scalar>
void Cnn<Scalar>::conv_backward(const SampleCache& cache, const Vector& d_flat, Tensors& grads) const
{
    const Index k = arch_.kernel;
    const Index c2 = arch_.conv2_out(), p1 = arch_.pool1_out(), c1 = arch_.conv1_out();

    const Eigen::Map<const Matrix> d_pool2(d_flat.data(), arch_.conv2_filters, arch_.pool2_out() * arch_.pool2_out());
    Matrix dz2 = unpool(Matrix(d_pool2), cache.arg2, c2 * c2);
    dz2 = (cache.act2.array() > Scalar(0)).select(dz2, Scalar(0));
    grads[2].noalias() += dz2 * cache.cols2.transpose();
    grads[3] += dz2.rowwise().sum();

    const Matrix d_cols2 = tensors_[2].transpose() * dz2;
    const Matrix d_pool1 = col2im(d_cols2, arch_.conv1_filters, p1, p1, k);
    Matrix dz1 = unpool(d_pool1, cache.arg1, c1 * c1);
    dz1 = (cache.act1.array() > Scalar(0)).select(dz1, Scalar(0));
    grads[0].noalias() += dz1 * cache.cols1.transpose();
    grads[1] += dz1.rowwise().sum();
}

template <typename Scalar>
typename Cnn<Scalar>::Vector Cnn<Scalar>::logits(const Matrix& input, std::uint64_t* pattern) const
{
    check_input(input);
    const Vector flat = conv_forward(input, nullptr, pattern);
    const Vector h1 = (tensors_[4] * flat + tensors_[5]).cwiseMax(Scalar(0));
    const Vector h2 = (tensors_[6] * h1 + tensors_[7]).cwiseMax(Scalar(0));
    if (pattern)
        *pattern = hash_gates(h2, hash_gates(h1, *pattern));
    return tensors_[8] * h2 + tensors_[9];
}

template <typename Scalar>
double Cnn<Scalar>::loss_and_gradient(std::span<const Matrix* const> inputs, std::span<const int> labels,
                                      Tensors& grads, std::mt19937_64* dropout_rng) const
{
    require(!inputs.empty() && inputs.size() == labels.size(), "batch inputs and labels must be non-empty and match");
    require(dropout_rate >= 0 && dropout_rate < 1, "dropout rate must lie in [0, 1)");
    const auto batch = static_cast<Index>(inputs.size());
    for (const Matrix* x : inputs)
        check_input(*x);
    for (int y : labels)
        require(y >= 0 && y < arch_.classes, "label out of range");

    std::vector<SampleCache> caches(inputs.size());
    Matrix flat(arch_.flat(), batch);
    for (Index b = 0; b < batch; ++b)
        flat.col(b) = conv_forward(*inputs[static_cast<size_t>(b)], &caches[static_cast<size_t>(b)]);

    const auto dropout_mask = [&](Index rows) {
        Matrix m = Matrix::Constant(rows, batch, Scalar(1));
        if (dropout_rng && dropout_rate > 0) {
            std::bernoulli_distribution keep(1.0 - dropout_rate);
            const auto scale = static_cast<Scalar>(1.0 / (1.0 - dropout_rate));
            for (Index c = 0; c < batch; ++c)
                for (Index r = 0; r < rows; ++r)
                    m(r, c) = keep(*dropout_rng) ? scale : Scalar(0);
        }
        return m;
    };

    const Matrix a1 = ((tensors_[4] * flat).colwise() + tensors_[5].col(0)).cwiseMax(Scalar(0));
    const Matrix m1 = dropout_mask(arch_.dense1);
    const Matrix h1 = a1.cwiseProduct(m1);
    const Matrix a2 = ((tensors_[6] * h1).colwise() + tensors_[7].col(0)).cwiseMax(Scalar(0));
    const Matrix m2 = dropout_mask(arch_.dense2);
    const Matrix h2 = a2.cwiseProduct(m2);
    const Matrix z = (tensors_[8] * h2).colwise() + tensors_[9].col(0);

    double total = 0;
    Matrix dz(z.rows(), batch);
    const double inv_b = 1.0 / static_cast<double>(batch);
    for (Index b = 0; b < batch; ++b) {
        const Eigen::VectorXd p = softmax(z.col(b));
        const int y = labels[static_cast<size_t>(b)];
        total -= std::log(std::max(p[y], 1e-300));
        Eigen::VectorXd g = p;
        g[y] -= 1.0;
        dz.col(b) = (g * inv_b).template cast<Scalar>();
    }

    grads[8].noalias() += dz * h2.transpose();
    grads[9] += dz.rowwise().sum();
    Matrix dh2 = tensors_[8].transpose() * dz;
    Matrix da2 = dh2.cwiseProduct(m2);
    da2 = (a2.array() > Scalar(0)).select(da2, Scalar(0));
    grads[6].noalias() += da2 * h1.transpose();
    grads[7] += da2.rowwise().sum();
    Matrix dh1 = tensors_[6].transpose() * da2;
    Matrix da1 = dh1.cwiseProduct(m1);
    da1 = (a1.array() > Scalar(0)).select(da1, Scalar(0));
    grads[4].noalias() += da1 * flat.transpose();
    grads[5] += da1.rowwise().sum();
    const Matrix d_flat = tensors_[4].transpose() * da1;

    for (Index b = 0; b < batch; ++b)
        conv_backward(caches[static_cast<size_t>(b)], d_flat.col(b), grads);

    return total * inv_b;
}

template <typename Scalar>
double Cnn<Scalar>::loss(std::span<const Matrix* const> inputs, std::span<const int> labels,
                         std::uint64_t* pattern) const
{
    require(!inputs.empty() && inputs.size() == labels.size(), "batch inputs and labels must be non-empty and match");
    if (pattern)
        *pattern = fnv1a("");
    double total = 0;
    for (size_t i = 0; i < inputs.size(); ++i) {
        const Eigen::VectorXd p = softmax(logits(*inputs[i], pattern));
        const int y = labels[i];
        require(y >= 0 && y < arch_.classes, "label out of range");
        total -= std::log(std::max(p[y], 1e-300));
    }
    return total / static_cast<double>(inputs.size());
}

template class Cnn<float>;
template class Cnn<double>;

} // namespace powerleak
