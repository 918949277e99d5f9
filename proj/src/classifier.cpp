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

#include "powerleak/classifier.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "powerleak/config_text.hpp"
#include "powerleak/random.hpp"

namespace powerleak {

using Eigen::Index;

static_assert(std::endian::native == std::endian::little, "checkpoints assume a little-endian host");

Optimizer parse_optimizer(std::string_view name)
{
    const std::string n = text::lower(text::trim(name));
    if (n == "adam")
        return Optimizer::adam;
    if (n == "sgd" || n == "sgd_momentum" || n == "momentum")
        return Optimizer::sgd_momentum;
    fail(Errc::invalid_argument, "unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(Optimizer o)
{
    return o == Optimizer::adam ? "adam" : "sgd_momentum";
}

void TrainConfig::validate() const
{
    require(epochs >= 1, "epochs must be >= 1");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(std::isfinite(learning_rate) && learning_rate > 0, "learning_rate must be positive");
    require(momentum >= 0 && momentum < 1, "momentum must lie in [0, 1)");
    require(dropout >= 0 && dropout < 1, "dropout must lie in [0, 1)");
    require(train_fraction > 0 && train_fraction <= 1, "train_fraction must lie in (0, 1]");
    require(warmup_steps >= 0, "warmup_steps must be >= 0");
}

namespace {

class Updater {
public:
    Updater(const DigitModel& model, const TrainConfig& cfg)
        : cfg_(cfg), m_(model.zero_like()), v_(model.zero_like())
    {
    }

    void step(DigitModel& model, const DigitModel::Tensors& grads)
    {
        ++t_;
        const double ramp = cfg_.warmup_steps > 0 ? std::min(1.0, static_cast<double>(t_) / cfg_.warmup_steps) : 1.0;
        const auto lr = static_cast<float>(cfg_.learning_rate * ramp);
        if (cfg_.optimizer == Optimizer::sgd_momentum) {
            const auto mu = static_cast<float>(cfg_.momentum);
            for (int i = 0; i < kTensorCount; ++i) {
                m_[i] = mu * m_[i] + grads[i];
                model.tensors()[i] -= lr * m_[i];
            }
            return;
        }
        constexpr float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
        const float c1 = 1.0f - std::pow(b1, static_cast<float>(t_));
        const float c2 = 1.0f - std::pow(b2, static_cast<float>(t_));
        for (int i = 0; i < kTensorCount; ++i) {
            m_[i] = b1 * m_[i] + (1 - b1) * grads[i];
            v_[i] = b2 * v_[i] + (1 - b2) * grads[i].cwiseAbs2();
            model.tensors()[i].array() -=
                lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
        }
    }

private:
    TrainConfig cfg_;
    DigitModel::Tensors m_, v_;
    long t_ = 0;
};

Evaluation evaluate_indices(const DigitModel& model, const std::vector<LabeledFeature>& data,
                            const std::vector<size_t>& idx)
{
    Evaluation e;
    for (size_t i : idx) {
        const auto& s = data[i];
        e.confusion(s.label, predict(model, s.feature).digit) += 1;
    }
    e.count = static_cast<int>(idx.size());
    e.accuracy = e.count ? static_cast<double>(e.confusion.trace()) / e.count : 0.0;
    return e;
}

} // namespace

TrainResult train(const std::vector<LabeledFeature>& data, const TrainConfig& cfg, const EpochCallback& on_epoch)
{
    cfg.validate();
    if (data.empty())
        fail(Errc::empty_dataset, "no training examples");
    std::array<int, 10> per_class{};
    for (const auto& s : data) {
        require(s.label >= 0 && s.label <= 9, "digit label out of range");
        s.feature.validate();
        ++per_class[static_cast<size_t>(s.label)];
    }
    for (int d = 0; d < 10; ++d)
        if (per_class[static_cast<size_t>(d)] == 0)
            fail(Errc::empty_class, "no training examples for digit " + std::to_string(d));

    std::mt19937_64 rng(derive_seed(cfg.seed, 1));
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    auto n_train = static_cast<size_t>(std::llround(cfg.train_fraction * static_cast<double>(data.size())));
    n_train = std::clamp<size_t>(n_train, 1, data.size());
    std::vector<size_t> train_idx(order.begin(), order.begin() + static_cast<long>(n_train));
    const std::vector<size_t> val_idx(order.begin() + static_cast<long>(n_train), order.end());

    TrainResult result;
    result.model = DigitModel::initialized(CnnArchitecture{}, derive_seed(cfg.seed, 2));
    result.model.dropout_rate = cfg.dropout;
    result.train_size = static_cast<int>(train_idx.size());
    result.val_size = static_cast<int>(val_idx.size());

    Updater updater(result.model, cfg);
    std::mt19937_64 dropout_rng(derive_seed(cfg.seed, 3));
    std::vector<const DigitModel::Matrix*> inputs;
    std::vector<int> labels;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double loss_sum = 0;
        size_t seen = 0;
        for (size_t start = 0; start < train_idx.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(train_idx.size(), start + static_cast<size_t>(cfg.batch_size));
            inputs.clear();
            labels.clear();
            for (size_t j = start; j < end; ++j) {
                inputs.push_back(&data[train_idx[j]].feature.matrix);
                labels.push_back(data[train_idx[j]].label);
            }
            auto grads = result.model.zero_like();
            const double loss = result.model.loss_and_gradient(inputs, labels, grads, &dropout_rng);
            if (!std::isfinite(loss))
                fail(Errc::divergence, "non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch starting at " +
                                           std::to_string(start) + " (learning_rate=" +
                                           text::format_double(cfg.learning_rate) + ")");
            updater.step(result.model, grads);
            loss_sum += loss * static_cast<double>(end - start);
            seen += end - start;
        }
        const double epoch_loss = loss_sum / static_cast<double>(seen);
        result.epoch_loss.push_back(epoch_loss);
        double val_acc = std::nan("");
        if (!val_idx.empty()) {
            val_acc = evaluate_indices(result.model, data, val_idx).accuracy;
            result.val_accuracy.push_back(val_acc);
        }
        if (on_epoch)
            on_epoch(epoch + 1, epoch_loss, val_acc);
    }
    return result;
}

Prediction predict(const DigitModel& model, const Feature130& feature)
{
    feature.validate();
    if (model.architecture().classes != 10)
        fail(Errc::shape_mismatch, "digit model must have 10 outputs");
    const Eigen::VectorXd p = softmax(model.logits(feature.matrix));
    Prediction out;
    for (int d = 0; d < 10; ++d)
        out.probabilities[static_cast<size_t>(d)] = p[d];
    // strict comparison keeps the lowest digit on ties
    for (int d = 1; d < 10; ++d)
        if (p[d] > p[out.digit])
            out.digit = d;
    return out;
}

Evaluation evaluate(const DigitModel& model, const std::vector<LabeledFeature>& data)
{
    if (data.empty())
        fail(Errc::empty_dataset, "nothing to evaluate");
    std::vector<size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    for (const auto& s : data)
        require(s.label >= 0 && s.label <= 9, "digit label out of range");
    return evaluate_indices(model, data, idx);
}

std::vector<GradCheckResult> grad_check(const DigitModel& model, const std::vector<LabeledFeature>& batch,
                                        int per_tensor, double epsilon, std::uint64_t seed, const GradientHook& hook)
{
    require(!batch.empty(), "gradient check needs at least one example", Errc::empty_dataset);
    require(per_tensor >= 1 && epsilon > 0, "invalid gradient check settings");
    Cnn<double> net = model.cast<double>();

    std::vector<Eigen::MatrixXd> inputs_d;
    std::vector<int> labels;
    for (const auto& s : batch) {
        s.feature.validate();
        inputs_d.push_back(s.feature.matrix.cast<double>());
        labels.push_back(s.label);
    }
    std::vector<const Eigen::MatrixXd*> inputs;
    for (const auto& m : inputs_d)
        inputs.push_back(&m);

    auto analytic = net.zero_like();
    net.loss_and_gradient(inputs, labels, analytic, nullptr);
    if (hook)
        hook(analytic);
    std::uint64_t base_pattern = 0;
    net.loss(inputs, labels, &base_pattern);

    std::mt19937_64 rng(seed);
    std::vector<GradCheckResult> out;
    for (int t = 0; t < kTensorCount; ++t) {
        Eigen::MatrixXd& w = net.tensors()[static_cast<size_t>(t)];
        std::vector<Index> picks(static_cast<size_t>(w.size()));
        std::iota(picks.begin(), picks.end(), Index{0});
        std::shuffle(picks.begin(), picks.end(), rng);
        GradCheckResult r{static_cast<LayerTensor>(t), 0, 0, 0.0};
        for (Index i : picks) {
            if (r.checked >= per_tensor)
                break;
            double& wi = w.data()[i];
            const double saved = wi;
            std::uint64_t up_pattern = 0, down_pattern = 0;
            wi = saved + epsilon;
            const double up = net.loss(inputs, labels, &up_pattern);
            wi = saved - epsilon;
            const double down = net.loss(inputs, labels, &down_pattern);
            wi = saved;
            if (up_pattern != base_pattern || down_pattern != base_pattern) {
                ++r.skipped_kinks;
                continue;
            }
            const double numeric = (up - down) / (2 * epsilon);
            const double a = analytic[static_cast<size_t>(t)].data()[i];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
            r.max_relative_error = std::max(r.max_relative_error, rel);
            ++r.checked;
        }
        out.push_back(r);
    }
    return out;
}

namespace {

constexpr char kMagic[8] = {'P', 'L', 'K', 'C', 'N', 'N', '\r', '\n'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& out, T v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& what)
{
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
        fail(Errc::malformed_header, what + ": truncated checkpoint");
    return v;
}

std::array<std::int32_t, 7> arch_fields(const CnnArchitecture& a)
{
    return {static_cast<std::int32_t>(a.input),   static_cast<std::int32_t>(a.conv1_filters),
            static_cast<std::int32_t>(a.conv2_filters), static_cast<std::int32_t>(a.kernel),
            static_cast<std::int32_t>(a.dense1),  static_cast<std::int32_t>(a.dense2),
            static_cast<std::int32_t>(a.classes)};
}

std::filesystem::path sidecar(const std::filesystem::path& p)
{
    return std::filesystem::path(p.string() + ".json");
}

} // namespace

void save_checkpoint(const DigitModel& model, const std::filesystem::path& path, const CheckpointMeta& meta)
{
    require(model.tensors()[0].size() > 0, "cannot save an empty model");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(Errc::unwritable_path, path.string());
    out.write(kMagic, sizeof kMagic);
    put(out, kCheckpointVersion);
    for (std::int32_t f : arch_fields(model.architecture()))
        put(out, f);
    for (const auto& t : model.tensors()) {
        put(out, static_cast<std::uint32_t>(t.rows()));
        put(out, static_cast<std::uint32_t>(t.cols()));
        out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    }
    if (!out)
        fail(Errc::io_error, path.string());

    nlohmann::ordered_json j;
    j["format"] = "powerleak-cnn";
    j["version"] = kCheckpointVersion;
    const auto a = model.architecture();
    j["architecture"] = {{"input", a.input},   {"conv1_filters", a.conv1_filters}, {"conv2_filters", a.conv2_filters},
                         {"kernel", a.kernel}, {"dense1", a.dense1},               {"dense2", a.dense2},
                         {"classes", a.classes}};
    j["dropout"] = model.dropout_rate;
    j["seed"] = meta.seed;
    j["config_hash"] = meta.config_hash;
    if (!meta.note.empty())
        j["note"] = meta.note;
    std::ofstream js(sidecar(path), std::ios::trunc);
    if (!js)
        fail(Errc::unwritable_path, sidecar(path).string());
    js << j.dump(2) << '\n';
}

DigitModel load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Errc::missing_file, path.string());
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        fail(Errc::malformed_header, path.string() + ": not a model checkpoint");
    const auto version = get<std::uint32_t>(in, path.string());
    if (version != kCheckpointVersion)
        fail(Errc::unsupported_encoding, path.string() + ": checkpoint version " + std::to_string(version));
    std::array<std::int32_t, 7> f{};
    for (auto& v : f)
        v = get<std::int32_t>(in, path.string());
    const CnnArchitecture arch{f[0], f[1], f[2], f[3], f[4], f[5], f[6]};
    try {
        arch.validate();
    } catch (const Error&) {
        fail(Errc::malformed_header, path.string() + ": invalid architecture");
    }
    DigitModel model(arch);
    for (int i = 0; i < kTensorCount; ++i) {
        auto& t = model.tensors()[static_cast<size_t>(i)];
        const auto rows = get<std::uint32_t>(in, path.string());
        const auto cols = get<std::uint32_t>(in, path.string());
        if (rows != t.rows() || cols != t.cols())
            fail(Errc::shape_mismatch, path.string() + ": tensor " + tensor_name(static_cast<LayerTensor>(i)) +
                                           " has the wrong shape");
        if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float))))
            fail(Errc::malformed_header, path.string() + ": truncated checkpoint");
    }

    std::ifstream js(sidecar(path));
    if (js) {
        try {
            const auto j = nlohmann::json::parse(js);
            model.dropout_rate = j.value("dropout", model.dropout_rate);
            if (meta) {
                meta->seed = j.value("seed", std::uint64_t{0});
                meta->config_hash = j.value("config_hash", std::string{});
                meta->note = j.value("note", std::string{});
            }
        } catch (const nlohmann::json::exception& e) {
            fail(Errc::malformed_header, sidecar(path).string() + ": " + e.what());
        }
    }
    return model;
}

} // namespace powerleak
