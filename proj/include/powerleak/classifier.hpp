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

// Training, inference, evaluation and checkpoints for the digit CNN.

#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "powerleak/cnn.hpp"
#include "powerleak/features.hpp"

namespace powerleak {

using DigitModel = Cnn<float>;

struct LabeledFeature {
    Feature130 feature;
    int label = 0;
};

enum class Optimizer { adam, sgd_momentum };

Optimizer parse_optimizer(std::string_view name);
std::string_view to_string(Optimizer o);

struct TrainConfig {
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 1e-3;
    Optimizer optimizer = Optimizer::adam;
    double momentum = 0.9; // sgd_momentum only
    double dropout = 0.5;
    double train_fraction = 0.9; // rest is held out for validation
    // Linear learning-rate ramp over the first updates. Adam's early steps are
    // near sign-sized on every weight, and against ~30k non-negative flattened
    // inputs that is enough to push most dense1 units dead before they learn.
    int warmup_steps = 200;
    std::uint64_t seed = 7;

    void validate() const;
};

struct TrainResult {
    DigitModel model;
    std::vector<double> epoch_loss;
    std::vector<double> val_accuracy; // empty when nothing is held out
    int train_size = 0;
    int val_size = 0;
};

using EpochCallback = std::function<void(int epoch, double loss, double val_accuracy)>;

/// Throws empty_dataset, empty_class (a digit with no examples) or divergence
/// (non-finite loss).
TrainResult train(const std::vector<LabeledFeature>& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

struct Prediction {
    int digit = 0;
    std::array<double, 10> probabilities{};
};

/// argmax of the softmax, ties going to the lower digit.
Prediction predict(const DigitModel& model, const Feature130& feature);

struct Evaluation {
    Eigen::Matrix<int, 10, 10> confusion = Eigen::Matrix<int, 10, 10>::Zero(); // rows: true, cols: predicted
    double accuracy = 0;
    int count = 0;
};

Evaluation evaluate(const DigitModel& model, const std::vector<LabeledFeature>& data);

struct GradCheckResult {
    LayerTensor tensor;
    int checked = 0;
    int skipped_kinks = 0; // probes whose +/- epsilon flipped a ReLU gate or pool choice
    double max_relative_error = 0;
};

/// Hook applied to the analytic gradients before comparison. Lets tests prove
/// that a corrupted backward pass is caught.
using GradientHook = std::function<void(Cnn<double>::Tensors&)>;

/// Central differences in double precision on `per_tensor` seeded entries of
/// every weight tensor (all entries when smaller). Dropout off.
/// relative error = |a - n| / max(|a|, |n|, 1e-6).
/// A probe whose perturbation moves the network onto a different linear piece
/// (some ReLU gate or max-pool choice changes) has no valid central difference;
/// it is counted in skipped_kinks and another seeded entry is drawn instead.
std::vector<GradCheckResult> grad_check(const DigitModel& model, const std::vector<LabeledFeature>& batch,
                                        int per_tensor = 50, double epsilon = 1e-5, std::uint64_t seed = 11,
                                        const GradientHook& hook = {});

struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string note;
};

/// Binary weights (magic, version, architecture, float32 little-endian
/// tensors) plus a `<path>.json` sidecar with the metadata.
void save_checkpoint(const DigitModel& model, const std::filesystem::path& path, const CheckpointMeta& meta = {});
DigitModel load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

} // namespace powerleak
