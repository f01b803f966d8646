#include "doctest.h"

#include <cmath>
#include <random>

#include "stn/backprop.hpp"
#include "stn/training.hpp"

using namespace stn;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.input_height = 8;
    cfg.input_width = 8;
    cfg.input_channels = 1;
    cfg.window = 2;
    cfg.conv_filters = {2};
    cfg.conv_kernels = {3};
    cfg.dense_units = {8};
    cfg.classes = 3;
    return cfg;
}

WindowSample random_sample(const ModelConfig& cfg, std::mt19937& rng) {
    WindowSample s;
    s.label = static_cast<int>(rng() % static_cast<unsigned>(cfg.classes));
    for (int t = 0; t < cfg.window; ++t) {
        Tensor3 f(cfg.input_height, cfg.input_width, cfg.input_channels);
        for (auto& v : f.data) v = static_cast<float>(uniform_range(rng, 0.0, 1.0));
        s.frames.push_back(std::move(f));
    }
    return s;
}

} // namespace

TEST_CASE("cross entropy values and errors") {
    std::vector<float> sure = {0.0f, 1.0f, 0.0f};
    CHECK(cross_entropy(sure, 1).loss == doctest::Approx(0.0f));

    std::vector<float> uniform = {1.0f / 3, 1.0f / 3, 1.0f / 3};
    CHECK(cross_entropy(uniform, 2).loss == doctest::Approx(std::log(3.0f)));

    CHECK_THROWS_AS(cross_entropy(uniform, 3), InputError);
    CHECK_THROWS_AS(cross_entropy(uniform, -1), InputError);

    auto ce = cross_entropy(uniform, 0);
    CHECK(ce.logit_gradient[0] == doctest::Approx(1.0f / 3 - 1.0f));
    CHECK(ce.logit_gradient[1] == doctest::Approx(1.0f / 3));
}

TEST_CASE("cross entropy gradient matches finite differences through softmax") {
    std::mt19937 rng(40);
    std::vector<double> logits(4);
    for (auto& v : logits) v = uniform_range(rng, -2.0, 2.0);
    const int label = 2;

    const auto loss_of = [&](const std::vector<double>& z) {
        auto p = softmax(std::span<const double>(z));
        return -std::log(p[label]);
    };
    auto probs = softmax(std::span<const double>(logits));
    const double eps = 1e-3;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        auto z = logits;
        z[i] += eps;
        const double plus = loss_of(z);
        z[i] -= 2 * eps;
        const double minus = loss_of(z);
        const double numeric = (plus - minus) / (2 * eps);
        const double analytic = probs[i] - (i == label ? 1.0 : 0.0);
        CHECK(std::abs(numeric - analytic) /
                  std::max({std::abs(numeric), std::abs(analytic), 1e-8}) <
              1e-3);
    }
}

TEST_CASE("flip is an involution and rotation zero is the identity") {
    std::mt19937 rng(41);
    Tensor3 frame(6, 7, 2);
    for (auto& v : frame.data) v = static_cast<float>(uniform_range(rng, 0.0, 1.0));
    CHECK(flip_horizontal(flip_horizontal(frame)).data == frame.data);
    CHECK(rotate_nearest(frame, 0.0f).data == frame.data);
}

TEST_CASE("augment draws once per window: all frames transform consistently") {
    auto cfg = tiny_config();
    std::mt19937 data_rng(42);
    WindowSample sample = random_sample(cfg, data_rng);
    sample.label = 1;

    Hyperparams hyper;
    hyper.flip_probability = 1.0f;  // force the flip
    hyper.rotation_limit_deg = 0.0f;

    std::mt19937 rng(1);
    auto flipped = augment(sample, hyper, rng);
    CHECK(flipped.label == 1);  // identity permutation keeps the label
    for (std::size_t t = 0; t < sample.frames.size(); ++t) {
        CHECK(flipped.frames[t].data == flip_horizontal(sample.frames[t]).data);
    }

    hyper.flip_label_permutation = {0, 2, 1};
    std::mt19937 rng2(1);
    auto swapped = augment(sample, hyper, rng2);
    CHECK(swapped.label == 2);

    hyper.flip_probability = 0.0f;
    hyper.rotation_limit_deg = 5.0f;
    std::mt19937 rng3(9);
    auto rotated = augment(sample, hyper, rng3);
    CHECK(rotated.label == 1);
    CHECK(rotated.frames.size() == sample.frames.size());
    for (const auto& f : rotated.frames) CHECK(f.same_shape(sample.frames[0]));
}

TEST_CASE("evaluate accuracy, confusion identity, and recount oracle") {
    auto cfg = tiny_config();
    auto model = build_model(cfg, 50);
    // Pin the prediction to class 0 with a huge output bias.
    model.params.dense_layers.back().biases = {100.0f, 0.0f, 0.0f};

    std::mt19937 rng(51);
    std::vector<WindowSample> samples;
    for (int label = 0; label < 3; ++label) {
        for (int i = 0; i < 4; ++i) {
            auto s = random_sample(cfg, rng);
            s.label = label;
            samples.push_back(std::move(s));
        }
    }
    auto eval = evaluate(model, samples);
    CHECK(eval.accuracy == doctest::Approx(1.0 / 3.0));
    for (std::size_t i = 0; i < 3; ++i) CHECK(eval.confusion[i][0] == 4);

    int trace = 0, total = 0, recount = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        trace += eval.confusion[i][i];
        for (std::size_t j = 0; j < 3; ++j) total += eval.confusion[i][j];
    }
    CHECK(static_cast<double>(trace) / total == doctest::Approx(eval.accuracy));
    for (const auto& s : samples) {
        recount += classify_window(model, s.frames).label == s.label ? 1 : 0;
    }
    CHECK(static_cast<double>(recount) / static_cast<double>(samples.size()) ==
          doctest::Approx(eval.accuracy));
}

TEST_CASE("zero learning rate leaves the weights untouched") {
    auto cfg = tiny_config();
    auto model = build_model(cfg, 52);
    std::mt19937 rng(53);
    std::vector<WindowSample> set;
    for (int i = 0; i < 6; ++i) set.push_back(random_sample(cfg, rng));

    Hyperparams hyper;
    hyper.learning_rate = 0.0f;
    hyper.epochs = 3;
    hyper.batch_size = 2;
    auto [trained, history] = train(model, set, set, hyper);
    CHECK(trained.params.conv_blocks[0].weights == model.params.conv_blocks[0].weights);
    CHECK(trained.params.dense_layers[1].weights == model.params.dense_layers[1].weights);
    CHECK(history.epochs.size() == 3);
}

TEST_CASE("training is deterministic per seed") {
    auto cfg = tiny_config();
    auto model = build_model(cfg, 54);
    std::mt19937 rng(55);
    std::vector<WindowSample> set;
    for (int i = 0; i < 10; ++i) set.push_back(random_sample(cfg, rng));

    Hyperparams hyper;
    hyper.epochs = 4;
    hyper.batch_size = 3;
    hyper.seed = 99;
    hyper.augment = true;

    auto [m1, h1] = train(model, set, set, hyper);
    auto [m2, h2] = train(model, set, set, hyper);
    REQUIRE(h1.epochs.size() == h2.epochs.size());
    for (std::size_t e = 0; e < h1.epochs.size(); ++e) {
        CHECK(h1.epochs[e].loss == h2.epochs[e].loss);
        CHECK(h1.epochs[e].train_accuracy == h2.epochs[e].train_accuracy);
        CHECK(h1.epochs[e].val_accuracy == h2.epochs[e].val_accuracy);
    }
    CHECK(m1.params.conv_blocks[0].weights == m2.params.conv_blocks[0].weights);
    CHECK(m1.params.dense_layers[0].weights == m2.params.dense_layers[0].weights);
}

TEST_CASE("train rejects inconsistent samples") {
    auto cfg = tiny_config();
    auto model = build_model(cfg, 56);
    std::mt19937 rng(57);
    std::vector<WindowSample> good = {random_sample(cfg, rng)};
    Hyperparams hyper;

    std::vector<WindowSample> empty;
    CHECK_THROWS_AS(train(model, empty, good, hyper), InputError);

    auto bad_label = good;
    bad_label[0].label = 7;
    CHECK_THROWS_AS(train(model, bad_label, good, hyper), InputError);

    auto bad_window = good;
    bad_window[0].frames.pop_back();
    CHECK_THROWS_AS(train(model, bad_window, good, hyper), InputError);
}

TEST_CASE("a tiny model overfits 32 samples") {
    DatasetSpec spec;
    spec.clips_per_class = 11;
    spec.frames_per_clip = 8;
    spec.height = 16;
    spec.width = 16;
    spec.channels = 1;
    spec.seed = 60;
    auto dataset = generate_dataset(spec);

    ModelConfig cfg;
    cfg.input_height = 16;
    cfg.input_width = 16;
    cfg.input_channels = 1;
    cfg.window = 3;
    cfg.conv_filters = {3, 4};
    cfg.conv_kernels = {3, 3};
    cfg.dense_units = {12};
    cfg.classes = 3;

    auto samples = uniform_windows(dataset, cfg.window);
    samples.resize(32);

    Hyperparams hyper;
    hyper.learning_rate = 0.05f;
    hyper.epochs = 120;
    hyper.batch_size = 8;
    hyper.seed = 61;

    auto model = build_model(cfg, 62);
    auto [trained, history] = train(model, samples, samples, hyper);
    CHECK(history.epochs.back().train_accuracy >= 0.99f);
}

TEST_CASE("zero logit gradient produces zero parameter gradients") {
    auto cfg = tiny_config();
    auto model = build_model(cfg, 63);
    std::mt19937 rng(64);
    auto sample = random_sample(cfg, rng);

    ForwardCacheT<float> cache;
    forward_window_cached(cfg, model.params, std::span<const Tensor3>(sample.frames), cache);
    std::vector<float> zero_grad(static_cast<std::size_t>(cfg.classes), 0.0f);
    auto grads = make_zero_params<float>(cfg);
    backward_window(model.params, std::span<const Tensor3>(sample.frames), cache,
                    std::span<const float>(zero_grad), grads);
    for (auto* v : param_vectors(grads)) {
        for (float g : *v) CHECK(g == 0.0f);
    }
}

TEST_CASE("end-to-end gradients match finite differences at three seeds") {
    auto cfg = tiny_config();
    std::mt19937 rng(65);
    for (std::uint32_t seed : {1u, 2u, 3u}) {
        auto model = build_model(cfg, seed);
        auto sample = random_sample(cfg, rng);
        const double err =
            grad_check(model, sample.frames, sample.label, 200, seed);
        CAPTURE(seed);
        CHECK(err < 1e-3);
    }
}

TEST_CASE("history csv format") {
    TrainHistory h;
    h.epochs.push_back({0.5f, 0.75f, 0.5f});
    h.epochs.push_back({0.25f, 0.875f, 0.75f});
    auto csv = h.to_csv();
    CHECK(csv.find("epoch,loss,train_acc,val_acc\n") == 0);
    CHECK(csv.find("1,0.5,0.75,0.5\n") != std::string::npos);
    CHECK(csv.find("2,0.25,0.875,0.75\n") != std::string::npos);
}
