#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "stn/config_file.hpp"
#include "stn/data.hpp"
#include "stn/io.hpp"
#include "stn/model.hpp"

using namespace stn;

namespace {

ModelConfig golfdb_config() {
    ModelConfig cfg;
    cfg.input_height = 160;
    cfg.input_width = 160;
    cfg.input_channels = 3;
    cfg.window = 16;
    cfg.conv_filters = {4, 8, 16, 32, 64};
    cfg.conv_kernels = {2, 2, 2, 2, 2};
    cfg.dense_units = {64, 32};
    cfg.classes = 9;
    return cfg;
}

ModelConfig jester_config() {
    ModelConfig cfg;
    cfg.input_height = 120;
    cfg.input_width = 120;
    cfg.input_channels = 3;
    cfg.window = 10;
    cfg.conv_filters = {4, 8, 16, 32};
    cfg.conv_kernels = {2, 2, 2, 2};
    cfg.dense_units = {16};
    cfg.classes = 3;
    return cfg;
}

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.input_height = 8;
    cfg.input_width = 8;
    cfg.input_channels = 1;
    cfg.window = 3;
    cfg.conv_filters = {2, 3};
    cfg.conv_kernels = {3, 3};
    cfg.dense_units = {8};
    cfg.classes = 3;
    return cfg;
}

Tensor3 random_frame(int h, int w, int c, std::mt19937& rng) {
    Tensor3 f(h, w, c);
    for (auto& v : f.data) v = static_cast<float>(uniform_range(rng, 0.0, 1.0));
    return f;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(in),
                             std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("golfdb config derives 5x5x64 features") {
    auto cfg = golfdb_config();
    cfg.validate();
    CHECK(cfg.output_height() == 5);
    CHECK(cfg.output_width() == 5);
    CHECK(cfg.output_channels() == 64);
    auto model = build_model(cfg, 1);
    CHECK(model.params.conv_blocks.size() == 5);
    CHECK(model.params.dense_layers.size() == 3);
    CHECK(model.params.dense_layers.back().out_features == 9);
}

TEST_CASE("jester config floors pooled dims to 7x7") {
    auto cfg = jester_config();
    cfg.validate();
    CHECK(cfg.output_height() == 7);
    CHECK(cfg.output_width() == 7);
    auto model = build_model(cfg, 2);
    CHECK(model.params.temporal.window == 10);
    CHECK(model.params.temporal.channels == 32);
}

TEST_CASE("build_model is deterministic per seed") {
    auto cfg = tiny_config();
    auto a = build_model(cfg, 99);
    auto b = build_model(cfg, 99);
    CHECK(a.params.conv_blocks[0].weights == b.params.conv_blocks[0].weights);
    CHECK(a.params.temporal.weights == b.params.temporal.weights);
    CHECK(a.params.dense_layers[1].weights == b.params.dense_layers[1].weights);
    auto c = build_model(cfg, 100);
    CHECK(a.params.conv_blocks[0].weights != c.params.conv_blocks[0].weights);
}

TEST_CASE("init stays within the fan-in bound and biases are zero") {
    auto model = build_model(tiny_config(), 5);
    const auto& block = model.params.conv_blocks[0];
    const float bound = std::sqrt(6.0f / (3 * 3 * 1));
    for (float w : block.weights) CHECK(std::abs(w) <= bound);
    for (float b : block.biases) CHECK(b == 0.0f);
}

TEST_CASE("config errors name the offending block") {
    auto cfg = tiny_config();
    cfg.conv_filters = {2, 3, 4, 5};  // 8 -> 4 -> 2 -> 1: block 4 cannot pool
    cfg.conv_kernels = {3, 3, 3, 3};
    try {
        cfg.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("block 4") != std::string::npos);
    }

    ModelConfig grow;  // output larger than input
    grow.input_height = 8;
    grow.input_width = 8;
    grow.input_channels = 1;
    grow.window = 2;
    grow.conv_filters = {64};
    grow.conv_kernels = {3};
    grow.dense_units = {4};
    grow.classes = 2;
    CHECK_THROWS_AS(grow.validate(), ConfigError);
}

TEST_CASE("extract_features matches manual kernel composition") {
    auto cfg = tiny_config();
    auto model = build_model(cfg, 17);
    std::mt19937 rng(18);
    auto frame = random_frame(8, 8, 1, rng);

    auto got = extract_features(model, frame);

    Tensor3 x = frame;
    for (const auto& block : model.params.conv_blocks) {
        auto z = conv2d(x, block);
        z = relu(z);
        x = maxpool2x2(z).output;
    }
    REQUIRE(got.size() == x.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(got.data[i] == x.data[i]);
    CHECK(got.size() < frame.size());

    Tensor3 zero(8, 8, 1);
    auto zf1 = extract_features(model, zero);
    auto zf2 = extract_features(model, zero);
    CHECK(zf1.data == zf2.data);
}

TEST_CASE("extract_features rejects wrong dims") {
    auto model = build_model(tiny_config(), 1);
    Tensor3 wrong(9, 8, 1);
    CHECK_THROWS_AS(extract_features(model, wrong), InputError);
}

TEST_CASE("temporal_combine selector and averaging weights") {
    const int t_len = 4;
    auto params = TemporalConvParamsT<float>::zeros(2, t_len);
    std::mt19937 rng(20);
    FeatureWindow window;
    for (int t = 0; t < t_len; ++t) window.push_back(random_frame(3, 3, 2, rng));

    // One-hot at the newest position returns the newest map.
    for (int c = 0; c < 2; ++c) params.weights[params.weight_index(c, t_len - 1)] = 1.0f;
    auto newest = temporal_combine(params, window);
    for (std::size_t i = 0; i < newest.size(); ++i) {
        CHECK(newest.data[i] == doctest::Approx(window.back().data[i]));
    }

    // Uniform 1/T weights average the window.
    for (auto& w : params.weights) w = 1.0f / t_len;
    auto mean = temporal_combine(params, window);
    for (std::size_t i = 0; i < mean.size(); ++i) {
        float want = 0;
        for (const auto& map : window) want += map.data[i] / t_len;
        CHECK(mean.data[i] == doctest::Approx(want));
    }
}

TEST_CASE("temporal_combine matches a naive triple loop") {
    const int t_len = 5;
    auto params = TemporalConvParamsT<float>::zeros(3, t_len);
    std::mt19937 rng(21);
    for (auto& w : params.weights) w = static_cast<float>(uniform_range(rng, -1, 1));
    for (auto& b : params.biases) b = static_cast<float>(uniform_range(rng, -1, 1));
    FeatureWindow window;
    for (int t = 0; t < t_len; ++t) window.push_back(random_frame(4, 2, 3, rng));

    auto got = temporal_combine(params, window);
    for (int m = 0; m < 4; ++m) {
        for (int n = 0; n < 2; ++n) {
            for (int c = 0; c < 3; ++c) {
                float want = params.biases[static_cast<std::size_t>(c)];
                for (int t = 0; t < t_len; ++t) {
                    want += params.weights[params.weight_index(c, t)] *
                            window[static_cast<std::size_t>(t)].at(m, n, c);
                }
                CHECK(got.at(m, n, c) == doctest::Approx(want).epsilon(1e-5));
            }
        }
    }
}

TEST_CASE("temporal_combine rejects wrong window length") {
    auto params = TemporalConvParamsT<float>::zeros(2, 4);
    FeatureWindow window(3, Tensor3(3, 3, 2));
    CHECK_THROWS_AS(temporal_combine(params, window), StateError);
}

TEST_CASE("classify_window probabilities sum to one and are deterministic") {
    auto cfg = tiny_config();
    auto model = build_model(cfg, 23);
    std::mt19937 rng(24);
    FeatureWindow frames;
    for (int t = 0; t < cfg.window; ++t) frames.push_back(random_frame(8, 8, 1, rng));

    auto a = classify_window(model, frames);
    auto b = classify_window(model, frames);
    CHECK(a.label == b.label);
    CHECK(a.probabilities == b.probabilities);
    float sum = 0;
    for (float p : a.probabilities) sum += p;
    CHECK(sum == doctest::Approx(1.0f).epsilon(1e-6));

    frames.pop_back();
    CHECK_THROWS_AS(classify_window(model, frames), InputError);
}

TEST_CASE("constant window output is invariant to temporal weight permutation") {
    auto cfg = tiny_config();
    auto model = build_model(cfg, 25);
    std::mt19937 rng(26);
    auto frame = random_frame(8, 8, 1, rng);
    FeatureWindow frames(static_cast<std::size_t>(cfg.window), frame);

    auto base = classify_window(model, frames);

    // Reverse each channel's temporal weights; a constant window cannot tell.
    auto permuted = model;
    auto& w = permuted.params.temporal.weights;
    for (int c = 0; c < permuted.params.temporal.channels; ++c) {
        std::reverse(w.begin() + c * cfg.window, w.begin() + (c + 1) * cfg.window);
    }
    auto same = classify_window(permuted, frames);
    for (std::size_t i = 0; i < base.probabilities.size(); ++i) {
        CHECK(same.probabilities[i] == doctest::Approx(base.probabilities[i]).epsilon(1e-5));
    }

    // A non-constant window generally does change under permutation.
    FeatureWindow varied;
    for (int t = 0; t < cfg.window; ++t) varied.push_back(random_frame(8, 8, 1, rng));
    auto p1 = classify_window(model, varied);
    auto p2 = classify_window(permuted, varied);
    bool differs = false;
    for (std::size_t i = 0; i < p1.probabilities.size(); ++i) {
        if (std::abs(p1.probabilities[i] - p2.probabilities[i]) > 1e-6f) differs = true;
    }
    CHECK(differs);
}

TEST_CASE("frame order only matters through the temporal weights") {
    auto cfg = tiny_config();
    auto model = build_model(cfg, 27);
    std::mt19937 rng(28);
    FeatureWindow frames;
    for (int t = 0; t < cfg.window; ++t) frames.push_back(random_frame(8, 8, 1, rng));
    FeatureWindow permuted = {frames[2], frames[0], frames[1]};

    // Unequal temporal weights: permuting the frames changes the output.
    auto p1 = classify_window(model, frames);
    auto p2 = classify_window(model, permuted);
    bool differs = false;
    for (std::size_t i = 0; i < p1.probabilities.size(); ++i) {
        if (std::abs(p1.probabilities[i] - p2.probabilities[i]) > 1e-6f) differs = true;
    }
    CHECK(differs);

    // Equal per-channel weights make the head order-blind.
    auto flat = model;
    auto& w = flat.params.temporal.weights;
    for (int c = 0; c < flat.params.temporal.channels; ++c) {
        const float v = w[flat.params.temporal.weight_index(c, 0)];
        for (int t = 1; t < cfg.window; ++t) w[flat.params.temporal.weight_index(c, t)] = v;
    }
    auto q1 = classify_window(flat, frames);
    auto q2 = classify_window(flat, permuted);
    for (std::size_t i = 0; i < q1.probabilities.size(); ++i) {
        CHECK(q2.probabilities[i] == doctest::Approx(q1.probabilities[i]).epsilon(1e-5));
    }
}

TEST_CASE("weight file round-trips bit-exactly") {
    auto model = build_model(tiny_config(), 31);
    const std::string p1 = temp_path("stn_w1.stnw");
    const std::string p2 = temp_path("stn_w2.stnw");
    save_weights(model, p1);
    auto loaded = load_weights(p1);
    CHECK(loaded.config == model.config);
    CHECK(loaded.params.conv_blocks[0].weights == model.params.conv_blocks[0].weights);
    CHECK(loaded.params.dense_layers[1].biases == model.params.dense_layers[1].biases);
    save_weights(loaded, p2);
    CHECK(slurp(p1) == slurp(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("weight loader rejects corruption") {
    auto model = build_model(tiny_config(), 32);
    const std::string path = temp_path("stn_w3.stnw");
    save_weights(model, path);
    auto bytes = slurp(path);

    SUBCASE("bad magic") {
        bytes[0] = 'X';
        std::ofstream(path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK_THROWS_AS(load_weights(path), FormatError);
    }
    SUBCASE("bad version") {
        bytes[4] = 9;
        std::ofstream(path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK_THROWS_AS(load_weights(path), FormatError);
    }
    SUBCASE("truncated file names the layer") {
        std::ofstream(path, std::ios::binary)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        try {
            load_weights(path);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("truncated") != std::string::npos);
            CHECK(msg.find("byte") != std::string::npos);
        }
    }
    SUBCASE("header from a larger config over-reads and is rejected") {
        // Bump the first dense width in the header: the parameter blocks no
        // longer fit and the loader fails on the short layer. Layout: magic(4)
        // version(4) h,w,c,T(16) l(4) n[2](8) rlen(4) r[2](8) b(4) then d[0].
        bytes[52] = 32;  // d[0]: 8 -> 32
        std::ofstream(path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        try {
            load_weights(path);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("layer") != std::string::npos);
        }
    }
    SUBCASE("trailing bytes are rejected") {
        bytes.push_back(0);
        std::ofstream(path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK_THROWS_AS(load_weights(path), FormatError);
    }
    std::remove(path.c_str());
}

TEST_CASE("model config text format round-trips") {
    auto cfg = golfdb_config();
    auto text = format_model_config(cfg);
    auto parsed = parse_model_config(text);
    CHECK(parsed == cfg);
}

TEST_CASE("model config text accepts a single shared kernel size") {
    const char* text =
        "input_h = 160\ninput_w = 160\ninput_c = 3\nT = 16\n"
        "l = 5\nn = 4,8,16,32,64\nr = 2\nb = 2\nd = 64,32\nk = 9\n";
    auto cfg = parse_model_config(text);
    CHECK(cfg.conv_kernels == std::vector<int>{2, 2, 2, 2, 2});
    CHECK(cfg == golfdb_config());
}

TEST_CASE("model config text rejects malformed input") {
    CHECK_THROWS_AS(parse_model_config("input_h = x\n"), FormatError);
    CHECK_THROWS_AS(parse_model_config("unknown_key = 3\n"), FormatError);
    const char* mismatch =
        "input_h = 32\ninput_w = 32\ninput_c = 1\nT = 4\n"
        "l = 3\nn = 4,8\nr = 3\nb = 1\nd = 16\nk = 3\n";
    CHECK_THROWS_AS(parse_model_config(mismatch), FormatError);
    CHECK_THROWS_AS(parse_model_config(""), FormatError);
}
