#include <doctest.h>

#include <fstream>

#include "powerleak/classifier.hpp"
#include "powerleak/corpus.hpp"
#include "powerleak/features.hpp"
#include "test_util.hpp"

using namespace powerleak;

namespace {

// One synthetic utterance per digit and speaker.
std::vector<LabeledFeature> digit_features(int speakers, std::uint64_t seed)
{
    SyntheticCorpusSpec spec;
    spec.speakers = speakers;
    spec.repetitions = 1;
    spec.seed = seed;
    std::vector<LabeledFeature> out;
    for (const auto& u : synthetic_digit_corpus(spec))
        out.push_back({featurize(u.audio), u.digit});
    return out;
}

bool same_weights(const DigitModel& a, const DigitModel& b)
{
    for (int t = 0; t < kTensorCount; ++t)
        if (a.tensors()[static_cast<size_t>(t)] != b.tensors()[static_cast<size_t>(t)])
            return false;
    return true;
}

} // namespace

TEST_CASE("features are 130x130 in [0, 1]")
{
    const Feature130 f = featurize(testutil::chirp(100, 1900, 8000, 0.8));
    CHECK(f.matrix.rows() == 130);
    CHECK(f.matrix.cols() == 130);
    CHECK(f.matrix.minCoeff() == 0.0f);
    CHECK(f.matrix.maxCoeff() == 1.0f);
}

TEST_CASE("1 kHz tone lights the middle row")
{
    const Feature130 f = featurize(testutil::tone(1000, 8000, 1.04));
    Eigen::Index row = 0;
    f.matrix.rowwise().sum().maxCoeff(&row);
    CHECK(std::abs(row - 65) <= 1);
}

TEST_CASE("features are amplitude invariant")
{
    const AudioBuffer x = testutil::chirp(200, 1500, 16000, 0.7, 0.8);
    AudioBuffer half = x;
    half.samples *= 0.5;
    CHECK((featurize(x).matrix - featurize(half).matrix).cwiseAbs().maxCoeff() < 1e-5f);
}

TEST_CASE("featurize input handling")
{
    CHECK_THROWS_AS(featurize(AudioBuffer(Eigen::VectorXd::Zero(8000), 8000)), Error);
    // any rate and length is resampled and centre-fitted
    CHECK_NOTHROW(featurize(testutil::tone(300, 44100, 2.0)));
    CHECK_NOTHROW(featurize(testutil::tone(300, 8000, 0.3)));
    Eigen::VectorXd x(5);
    x << 1, 2, 3, 4, 5;
    CHECK(centre_fit(x, 3) == Eigen::Vector3d(2, 3, 4));
    Eigen::VectorXd padded(7);
    padded << 0, 1, 2, 3, 4, 5, 0;
    CHECK(centre_fit(x, 7) == padded);
}

TEST_CASE("max pooling halves dimensions with floor")
{
    Eigen::MatrixXf act(1, 25);
    for (int i = 0; i < 25; ++i)
        act(0, i) = static_cast<float>(i);
    std::vector<int> arg;
    const Eigen::MatrixXf pooled = max_pool2x2(act, 5, 5, arg);
    REQUIRE(pooled.cols() == 4);
    CHECK(pooled(0, 0) == 6.0f);
    CHECK(pooled(0, 3) == 18.0f);
    CHECK(CnnArchitecture{}.pool1_out() == 64);
    CHECK(CnnArchitecture{}.pool2_out() == 31);
}

TEST_CASE("softmax sums to one for any logits")
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0, 30);
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd z(10);
        for (int i = 0; i < 10; ++i)
            z[i] = n(rng);
        CHECK(std::abs(softmax(z).sum() - 1.0) <= 1e-6);
    }
    const Eigen::VectorXd big = Eigen::VectorXd::Constant(10, 1e4);
    CHECK(softmax(big).isApproxToConstant(0.1));
}

TEST_CASE("zero model predicts digit 0 on every input")
{
    const DigitModel zero{CnnArchitecture{}};
    const auto data = digit_features(1, 3);
    for (const auto& s : data) {
        const Prediction p = predict(zero, s.feature);
        CHECK(p.digit == 0);
        double sum = 0;
        for (double v : p.probabilities)
            sum += v;
        CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
    // a constant predictor puts everything in column 0
    const Evaluation e = evaluate(zero, data);
    CHECK(e.confusion.col(0).sum() == 10);
    CHECK(e.confusion.rightCols(9).sum() == 0);
    CHECK(e.accuracy == doctest::Approx(0.1));
    CHECK_THROWS_AS(evaluate(zero, {}), Error);
}

TEST_CASE("predict is deterministic and rejects wrong shapes")
{
    const DigitModel m = DigitModel::initialized(CnnArchitecture{}, 4);
    const auto data = digit_features(1, 4);
    const Prediction a = predict(m, data[3].feature);
    const Prediction b = predict(m, data[3].feature);
    CHECK(a.digit == b.digit);
    CHECK(a.probabilities == b.probabilities);
    Feature130 bad{Eigen::MatrixXf::Zero(128, 130)};
    CHECK_THROWS_AS(predict(m, bad), Error);
}

TEST_CASE("gradient check passes for every layer")
{
    const DigitModel m = DigitModel::initialized(CnnArchitecture{}, 21);
    auto data = digit_features(1, 5);
    data.resize(2);
    const auto results = grad_check(m, data);
    REQUIRE(results.size() == static_cast<size_t>(kTensorCount));
    for (const auto& r : results) {
        CAPTURE(tensor_name(r.tensor));
        CHECK(r.checked > 0);
        CHECK(r.max_relative_error < 1e-4);
    }
}

TEST_CASE("gradient check catches a corrupted conv gradient")
{
    const DigitModel m = DigitModel::initialized(CnnArchitecture{}, 21);
    auto data = digit_features(1, 5);
    data.resize(1);
    const auto hook = [](Cnn<double>::Tensors& g) { g[static_cast<size_t>(LayerTensor::conv2_w)] *= 1.2; };
    const auto results = grad_check(m, data, 20, 1e-5, 11, hook);
    for (const auto& r : results) {
        if (r.tensor == LayerTensor::conv2_w)
            CHECK(r.max_relative_error > 1e-2);
        else
            CHECK(r.max_relative_error < 1e-4);
    }
}

TEST_CASE("zero input gives finite gradients")
{
    const Cnn<double> m = DigitModel::initialized(CnnArchitecture{}, 2).cast<double>();
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(130, 130);
    const Eigen::MatrixXd* inputs[] = {&zero};
    const int labels[] = {7};
    Cnn<double>::Tensors g = m.zero_like();
    const double loss = m.loss_and_gradient(inputs, labels, g, nullptr);
    CHECK(std::isfinite(loss));
    for (const auto& t : g)
        CHECK(t.allFinite());
}

TEST_CASE("single batch overfits within 200 epochs")
{
    const auto data = digit_features(1, 6);
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch_size = 10;
    cfg.train_fraction = 1.0;
    cfg.warmup_steps = 20; // 200 single-batch steps; the default ramp would eat all of them
    cfg.dropout = 0.0; // a capacity check, so no regulariser
    const TrainResult r = train(data, cfg);
    CHECK(r.val_accuracy.empty());
    CHECK(r.epoch_loss.back() <= 0.5 * r.epoch_loss.front());
    const Evaluation e = evaluate(r.model, data);
    CHECK(e.accuracy == 1.0);
    CHECK(e.confusion.isDiagonal());
    for (const auto& s : data)
        CHECK(predict(r.model, s.feature).probabilities[static_cast<size_t>(s.label)] > 0.99);
}

TEST_CASE("same seed gives bit-identical weights")
{
    const auto data = digit_features(2, 7);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    const TrainResult a = train(data, cfg);
    const TrainResult b = train(data, cfg);
    CHECK(same_weights(a.model, b.model));
    CHECK(a.epoch_loss == b.epoch_loss);
    cfg.seed += 1;
    CHECK_FALSE(same_weights(a.model, train(data, cfg).model));
}

TEST_CASE("training input validation")
{
    auto data = digit_features(1, 8);
    TrainConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train({}, cfg), Error);
    data.pop_back(); // no nines left
    try {
        train(data, cfg);
        FAIL("expected empty_class");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::empty_class);
    }
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    CHECK(parse_optimizer("SGD_Momentum") == Optimizer::sgd_momentum);
    CHECK_THROWS_AS(parse_optimizer("rmsprop"), Error);
}

TEST_CASE("absurd learning rate reports divergence")
{
    const auto data = digit_features(2, 9);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.learning_rate = 1e30;
    cfg.warmup_steps = 0;
    cfg.optimizer = Optimizer::sgd_momentum;
    try {
        train(data, cfg);
        FAIL("expected divergence");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::divergence);
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("checkpoint round trip")
{
    testutil::TempDir dir("ckpt");
    const DigitModel m = DigitModel::initialized(CnnArchitecture{}, 12);
    save_checkpoint(m, dir.path / "m.bin", {42, "abc", "unit"});
    CheckpointMeta meta;
    const DigitModel back = load_checkpoint(dir.path / "m.bin", &meta);
    CHECK(same_weights(m, back));
    CHECK(meta.seed == 42);
    CHECK(meta.config_hash == "abc");
    CHECK(std::filesystem::exists(dir.path / "m.bin.json"));

    // byte-identical on rewrite
    save_checkpoint(back, dir.path / "again.bin", {42, "abc", "unit"});
    std::ifstream a(dir.path / "m.bin", std::ios::binary), b(dir.path / "again.bin", std::ios::binary);
    CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST_CASE("corrupt checkpoints are rejected")
{
    testutil::TempDir dir("ckbad");
    CHECK_THROWS_AS(load_checkpoint(dir.path / "none.bin"), Error);
    {
        std::ofstream o(dir.path / "bad.bin", std::ios::binary);
        o << "NOTACNN-and-some-more-bytes";
    }
    try {
        load_checkpoint(dir.path / "bad.bin");
        FAIL("expected malformed_header");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::malformed_header);
    }
    save_checkpoint(DigitModel::initialized(CnnArchitecture{}, 1), dir.path / "ok.bin");
    std::filesystem::resize_file(dir.path / "ok.bin", 2000);
    CHECK_THROWS_AS(load_checkpoint(dir.path / "ok.bin"), Error);
}
