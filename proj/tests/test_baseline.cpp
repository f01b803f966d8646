#include "doctest.h"

#include <map>
#include <random>

#include "stn/baseline.hpp"
#include "stn/training.hpp"

using namespace stn;

namespace {

ModelConfig tiny_config(int window) {
    ModelConfig cfg;
    cfg.input_height = 8;
    cfg.input_width = 8;
    cfg.input_channels = 1;
    cfg.window = window;
    cfg.conv_filters = {2};
    cfg.conv_kernels = {3};
    cfg.dense_units = {6};
    cfg.classes = 3;
    return cfg;
}

Tensor3 random_frame(std::mt19937& rng) {
    Tensor3 f(8, 8, 1);
    for (auto& v : f.data) v = static_cast<float>(uniform_range(rng, 0.0, 1.0));
    return f;
}

} // namespace

TEST_CASE("majority vote basics") {
    std::vector<int> a = {0, 0, 1};
    CHECK(majority_vote(a) == 0);
    std::vector<int> tie = {1, 2};
    CHECK(majority_vote(tie) == 1);
    std::vector<int> one = {2};
    CHECK(majority_vote(one) == 2);
    std::vector<int> none;
    CHECK_THROWS_AS(majority_vote(none), InputError);
}

TEST_CASE("majority vote matches a counting oracle and ignores order") {
    std::mt19937 rng(70);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> labels(1 + rng() % 9);
        for (auto& l : labels) l = static_cast<int>(rng() % 4);

        std::map<int, int> counts;
        for (int l : labels) counts[l]++;
        int best = -1, best_count = -1;
        for (const auto& [label, count] : counts) {
            if (count > best_count) {
                best = label;
                best_count = count;
            }
        }
        CHECK(majority_vote(labels) == best);

        auto shuffled = labels;
        deterministic_shuffle(shuffled, rng);
        CHECK(majority_vote(shuffled) == majority_vote(labels));
    }
}

TEST_CASE("predict_frame equals the windowed model at T=1") {
    auto cfg = tiny_config(1);
    auto model = build_model(cfg, 71);
    auto fm = build_frame_model(cfg, 71);  // same seed, same T=1 config
    std::mt19937 rng(72);
    for (int i = 0; i < 5; ++i) {
        auto frame = random_frame(rng);
        auto from_fm = predict_frame(fm, frame);
        const Tensor3 window[1] = {frame};
        auto from_model = classify_window(model, std::span<const Tensor3>(window, 1));
        CHECK(from_fm.label == from_model.label);
        CHECK(from_fm.probabilities == from_model.probabilities);
    }
}

TEST_CASE("frame model derived from a windowed config forces T=1") {
    auto cfg = tiny_config(6);
    auto fm = build_frame_model(cfg, 73);
    CHECK(fm.model.config.window == 1);
    CHECK(fm.model.params.temporal.window == 1);
    Tensor3 f(8, 8, 1);
    CHECK(predict_frame(fm, f).probabilities.size() == 3);
}

TEST_CASE("constant frame model scores the frequency of its class") {
    auto cfg = tiny_config(4);
    auto fm = build_frame_model(cfg, 74);
    fm.model.params.dense_layers.back().biases = {0.0f, 100.0f, 0.0f};  // always class 1

    std::mt19937 rng(75);
    std::vector<WindowSample> samples;
    for (int label = 0; label < 3; ++label) {
        for (int i = 0; i < 3 + label; ++i) {  // 3, 4, 5 windows per class
            WindowSample s;
            s.label = label;
            for (int t = 0; t < 4; ++t) s.frames.push_back(random_frame(rng));
            samples.push_back(std::move(s));
        }
    }
    const double acc = evaluate_baseline(fm, samples);
    CHECK(acc == doctest::Approx(4.0 / 12.0));
}

TEST_CASE("with single-frame windows the baseline equals plain evaluation") {
    auto cfg = tiny_config(1);
    auto fm = build_frame_model(cfg, 76);
    std::mt19937 rng(77);
    std::vector<WindowSample> samples;
    for (int i = 0; i < 12; ++i) {
        WindowSample s;
        s.label = static_cast<int>(rng() % 3);
        s.frames.push_back(random_frame(rng));
        samples.push_back(std::move(s));
    }
    const double vote_acc = evaluate_baseline(fm, samples);
    const auto eval = evaluate(fm.model, samples);
    CHECK(vote_acc == doctest::Approx(eval.accuracy));
}

TEST_CASE("frames_of_windows explodes windows and inherits labels") {
    std::mt19937 rng(78);
    std::vector<WindowSample> windows;
    for (int i = 0; i < 3; ++i) {
        WindowSample s;
        s.label = i;
        for (int t = 0; t < 4; ++t) s.frames.push_back(random_frame(rng));
        windows.push_back(std::move(s));
    }
    auto frames = frames_of_windows(windows);
    REQUIRE(frames.size() == 12);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        CHECK(frames[i].frames.size() == 1);
        CHECK(frames[i].label == static_cast<int>(i / 4));
        CHECK(frames[i].frames[0].data == windows[i / 4].frames[i % 4].data);
    }
}
