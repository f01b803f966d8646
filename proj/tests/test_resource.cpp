#include "doctest.h"

#include <random>

#include "stn/data.hpp"
#include "stn/resource.hpp"

using namespace stn;

namespace {

ModelConfig golfdb_config(int window) {
    ModelConfig cfg;
    cfg.input_height = 160;
    cfg.input_width = 160;
    cfg.input_channels = 3;
    cfg.window = window;
    cfg.conv_filters = {4, 8, 16, 32, 64};
    cfg.conv_kernels = {2, 2, 2, 2, 2};
    cfg.dense_units = {64, 32};
    cfg.classes = 9;
    return cfg;
}

const LayerCost& row(const std::vector<LayerCost>& rows, const std::string& name) {
    for (const auto& r : rows) {
        if (r.name == name) return r;
    }
    FAIL("missing layer row ", name);
    return rows.front();
}

ModelConfig random_valid_config(std::mt19937& rng) {
    for (;;) {
        ModelConfig cfg;
        cfg.input_height = 8 + static_cast<int>(rng() % 17);
        cfg.input_width = 8 + static_cast<int>(rng() % 17);
        cfg.input_channels = 1 + static_cast<int>(rng() % 3);
        cfg.window = 1 + static_cast<int>(rng() % 5);
        const int l = 1 + static_cast<int>(rng() % 3);
        for (int i = 0; i < l; ++i) {
            cfg.conv_filters.push_back(1 + static_cast<int>(rng() % 6));
            cfg.conv_kernels.push_back(1 + static_cast<int>(rng() % 4));
        }
        const int b = 1 + static_cast<int>(rng() % 2);
        for (int j = 0; j < b; ++j) cfg.dense_units.push_back(2 + static_cast<int>(rng() % 14));
        cfg.classes = 2 + static_cast<int>(rng() % 4);
        try {
            cfg.validate();
            return cfg;
        } catch (const ConfigError&) {
            continue;
        }
    }
}

} // namespace

TEST_CASE("golfdb per-layer costs match direct formula evaluation") {
    auto rows = layer_costs(golfdb_config(16));
    const auto& conv1 = row(rows, "CONV-1");
    CHECK(conv1.weight_values == 48);           // 2*2*3*4
    CHECK(conv1.ops == 1228800);                // 2*2*3*4*160*160
    CHECK(conv1.activation_values == 160 * 160 * 4);

    const auto& temporal = row(rows, "CONV1x1");
    CHECK(temporal.weight_values == 1024);      // 64*16
    CHECK(temporal.ops == 25600);               // 64*16*5*5
    CHECK(temporal.activation_values == 5 * 5 * 64);

    for (const auto& r : rows) {
        if (r.kind == LayerKind::pool) CHECK(r.weight_values == 0);
    }
    CHECK(row(rows, "INPUT").activation_values == 76800);
    CHECK(row(rows, "WINDOW").activation_values == 5ull * 5 * 64 * 16);
}

TEST_CASE("golfdb totals match the expected memory figures across T") {
    struct Expect {
        int window;
        std::uint64_t m_w, m_a, m;
    };
    const Expect table[] = {
        {1, 115728, 180800, 296528},
        {4, 115920, 185600, 301520},
        {8, 116176, 192000, 308176},
        {16, 116688, 204800, 321488},
    };
    for (const auto& e : table) {
        auto report = totals(golfdb_config(e.window));
        CHECK(report.weight_values == e.m_w);
        CHECK(report.activation_values() == e.m_a);
        CHECK(report.memory_values() == e.m);
        CHECK(report.extractor_activations == 179200);  // input + CONV-1 pair
    }
}

TEST_CASE("conservative head accounting is at least the buffer figure") {
    auto buffer = totals(golfdb_config(16), 4, HeadActivationMode::window_buffer);
    auto pairs = totals(golfdb_config(16), 4, HeadActivationMode::consecutive_pairs);
    CHECK(pairs.head_activations >= buffer.head_activations);
    CHECK(pairs.head_activations == 5ull * 5 * 64 * 16 + 5ull * 5 * 64);
}

TEST_CASE("report is a pure function of the config") {
    auto a = totals(golfdb_config(8));
    auto b = totals(golfdb_config(8));
    CHECK(a.weight_values == b.weight_values);
    CHECK(a.activation_values() == b.activation_values());
    CHECK(a.ops == b.ops);
    CHECK(a.layers.size() == b.layers.size());
}

TEST_CASE("increasing T only moves the temporal terms") {
    auto small = totals(golfdb_config(4));
    auto large = totals(golfdb_config(16));
    // g-side rows are identical.
    for (std::size_t i = 0; i < small.layers.size(); ++i) {
        const auto& s = small.layers[i];
        const auto& l = large.layers[i];
        if (s.kind == LayerKind::window_buffer || s.kind == LayerKind::temporal) continue;
        CHECK(s.weight_values == l.weight_values);
        CHECK(s.activation_values == l.activation_values);
        CHECK(s.ops == l.ops);
    }
    CHECK(large.ops - small.ops == 64ull * (16 - 4) * 5 * 5);
    CHECK(large.weight_values - small.weight_values == 64ull * (16 - 4));
    CHECK(large.extractor_activations == small.extractor_activations);
}

TEST_CASE("budget gate is strict and names the violated axis") {
    auto report = totals(golfdb_config(16), 1);
    CHECK(report.memory_bytes() == 321488);

    DeviceBudget mb;
    mb.max_memory_bytes = 1048576;
    auto pass = check_budget(report, mb);
    CHECK(pass.pass);
    CHECK(pass.detail.find("memory") != std::string::npos);

    DeviceBudget tight;
    tight.max_memory_bytes = 300000;
    auto fail = check_budget(report, tight);
    CHECK_FALSE(fail.pass);
    CHECK(fail.detail.find("memory") != std::string::npos);
    CHECK(fail.detail.find("over by") != std::string::npos);

    DeviceBudget ops_only;
    ops_only.max_ops = report.ops;  // equality must fail: the bound is strict
    auto strict = check_budget(report, ops_only);
    CHECK_FALSE(strict.pass);
    CHECK(strict.detail.find("ops") != std::string::npos);

    ops_only.max_ops = report.ops + 1;
    CHECK(check_budget(report, ops_only).pass);
}

TEST_CASE("single-pixel conv counts one MAC per input channel") {
    auto p = ConvLayerParamsT<float>::zeros(1, 3, 1);
    Tensor3 in(1, 1, 3);
    OpCountScope scope;
    conv2d(in, p);
    CHECK(scope.count() == 3);
}

TEST_CASE("instrumented execution equals the formula on random configs") {
    std::mt19937 rng(2024);
    for (int trial = 0; trial < 8; ++trial) {
        auto cfg = random_valid_config(rng);
        CAPTURE(trial);
        auto report = totals(cfg);
        auto model = build_model(cfg, 1000 + static_cast<std::uint32_t>(trial));
        CHECK(non_bias_parameter_count(model) == report.weight_values);

        FeatureWindow frames;
        for (int t = 0; t < cfg.window; ++t) {
            Tensor3 f(cfg.input_height, cfg.input_width, cfg.input_channels);
            for (auto& v : f.data) v = static_cast<float>(uniform_range(rng, 0.0, 1.0));
            frames.push_back(std::move(f));
        }
        CHECK(count_ops_instrumented(model, frames) == report.ops);

        // Cost is data independent.
        FeatureWindow zeros(frames.size(),
                            Tensor3(cfg.input_height, cfg.input_width, cfg.input_channels));
        CHECK(count_ops_instrumented(model, zeros) == report.ops);
    }
}

TEST_CASE("golfdb instrumented total matches the formula sum") {
    auto cfg = golfdb_config(16);
    auto report = totals(cfg);
    auto model = build_model(cfg, 7);
    FeatureWindow frames(16, Tensor3(160, 160, 3));
    CHECK(count_ops_instrumented(model, frames) == report.ops);
    CHECK(report.ops == 5429536);  // 4.5M conv + 0.79M pool + 0.13M head
}

TEST_CASE("csv rendering is stable") {
    auto report = totals(golfdb_config(16));
    auto csv = render_report_csv(report);
    CHECK(csv.find("layer,kind,m_w,m_a,c\n") == 0);
    CHECK(csv.find("CONV-1,conv,48,102400,1228800") != std::string::npos);
    CHECK(csv.find("TOTAL,total,116688,204800,5429536") != std::string::npos);
}
