// Command-line front end: dataset generation, training, evaluation,
// streaming inference, resource estimation, quantization, and a small
// throughput benchmark.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 failed
// budget verdict.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include "CLI11.hpp"

#include "stn/baseline.hpp"
#include "stn/config_file.hpp"
#include "stn/data.hpp"
#include "stn/errors.hpp"
#include "stn/model.hpp"
#include "stn/quant.hpp"
#include "stn/resource.hpp"
#include "stn/streaming.hpp"
#include "stn/training.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitBudget = 3;

std::vector<stn::WindowSample> select_split(std::vector<stn::WindowSample> all,
                                            const std::string& split, std::uint32_t seed) {
    if (split == "all") return all;
    auto indices = stn::split_dataset(all.size(), seed);
    const std::vector<std::size_t>* pick = nullptr;
    if (split == "train") pick = &indices.train;
    else if (split == "val") pick = &indices.val;
    else if (split == "test") pick = &indices.test;
    else throw stn::InputError("unknown split '" + split + "'");
    std::vector<stn::WindowSample> out;
    out.reserve(pick->size());
    for (std::size_t i : *pick) out.push_back(std::move(all[i]));
    return out;
}

void check_dataset_matches(const stn::Dataset& dataset, const stn::ModelConfig& cfg) {
    if (dataset.height != cfg.input_height || dataset.width != cfg.input_width ||
        dataset.channels != cfg.input_channels) {
        throw stn::InputError("dataset frames are " + std::to_string(dataset.height) + "x" +
                              std::to_string(dataset.width) + "x" +
                              std::to_string(dataset.channels) + " but the model expects " +
                              std::to_string(cfg.input_height) + "x" +
                              std::to_string(cfg.input_width) + "x" +
                              std::to_string(cfg.input_channels));
    }
    if (dataset.classes > cfg.classes) {
        throw stn::InputError("dataset has more classes than the model head");
    }
}

void print_confusion(const stn::Evaluation& eval) {
    for (std::size_t i = 0; i < eval.confusion.size(); ++i) {
        std::cout << "confusion," << i;
        for (int v : eval.confusion[i]) std::cout << ',' << v;
        std::cout << '\n';
    }
}

struct GenDataArgs {
    std::string out;
    stn::DatasetSpec spec;
};

struct TrainArgs {
    std::string config_path, data_path, out_path, history_path;
    stn::Hyperparams hyper;
    bool baseline = false;
};

struct EvalArgs {
    std::string weights, data, split = "all";
    std::uint32_t seed = 1;
};

struct BaselineArgs {
    std::string weights, data, split = "all";
    int window = 0;
    std::uint32_t seed = 1;
};

struct StreamArgs {
    std::string weights, data;
    int stride = 0;  // 0: one prediction per window (stride = T)
};

struct EstimateArgs {
    std::string config_path;
    int bytes_per_value = 4;
    std::optional<std::uint64_t> mem_budget;
    std::optional<std::uint64_t> ops_budget;
    std::string ma_mode = "buffer";
};

struct QuantizeArgs {
    std::string weights, data, out, split = "all";
    int calibration_windows = 64;
    std::uint32_t seed = 1;
};

struct BenchArgs {
    std::string weights;
    int frames = 64;
    int stride = 1;
    std::uint32_t seed = 1;
};

int run_gen_data(const GenDataArgs& args) {
    auto dataset = stn::generate_dataset(args.spec);
    stn::save_dataset(dataset, args.out);
    std::cout << "wrote " << dataset.clips.size() << " clips (" << args.spec.classes
              << " classes x " << args.spec.clips_per_class << ", " << args.spec.frames_per_clip
              << " frames of " << args.spec.height << "x" << args.spec.width << "x"
              << args.spec.channels << ") to " << args.out << '\n';
    return kExitOk;
}

int run_train(const TrainArgs& args) {
    auto cfg = stn::load_model_config(args.config_path);
    auto dataset = stn::load_dataset(args.data_path);
    check_dataset_matches(dataset, cfg);

    auto windows = stn::uniform_windows(dataset, cfg.window);
    auto split = stn::split_dataset(windows.size(), args.hyper.seed);

    std::vector<stn::WindowSample> train_set, val_set, test_set;
    for (auto i : split.train) train_set.push_back(windows[i]);
    for (auto i : split.val) val_set.push_back(windows[i]);
    for (auto i : split.test) test_set.push_back(windows[i]);

    stn::Model initial = args.baseline
                             ? stn::build_frame_model(cfg, args.hyper.seed).model
                             : stn::build_model(cfg, args.hyper.seed);
    if (args.baseline) {
        train_set = stn::frames_of_windows(train_set);
        val_set = stn::frames_of_windows(val_set);
    }

    auto [model, history] = stn::train(initial, train_set, val_set, args.hyper);
    stn::save_weights(model, args.out_path);

    std::cout << history.to_csv();
    std::cout << "best_epoch," << history.best_epoch << ",val_acc," << history.best_val_accuracy
              << '\n';
    if (!test_set.empty()) {
        if (args.baseline) {
            const double acc = stn::evaluate_baseline(stn::FrameModel{model}, test_set);
            std::cout << "test_acc," << acc << '\n';
        } else {
            std::cout << "test_acc," << stn::evaluate(model, test_set).accuracy << '\n';
        }
    }
    if (!args.history_path.empty()) {
        std::ofstream out(args.history_path);
        if (!out) throw stn::FormatError("cannot open '" + args.history_path + "'");
        out << history.to_csv();
    }
    return kExitOk;
}

int run_eval(const EvalArgs& args) {
    auto model = stn::load_weights(args.weights);
    auto dataset = stn::load_dataset(args.data);
    check_dataset_matches(dataset, model.config);
    auto windows =
        select_split(stn::uniform_windows(dataset, model.config.window), args.split, args.seed);
    auto eval = stn::evaluate(model, windows);
    std::cout << "accuracy," << eval.accuracy << '\n';
    print_confusion(eval);
    return kExitOk;
}

int run_eval_baseline(const BaselineArgs& args) {
    auto model = stn::load_weights(args.weights);
    if (model.config.window != 1) {
        throw stn::InputError("baseline weights must be a window-1 frame model");
    }
    auto dataset = stn::load_dataset(args.data);
    check_dataset_matches(dataset, model.config);
    const int window = args.window > 0 ? args.window : dataset.frames_per_clip;
    auto windows = select_split(stn::uniform_windows(dataset, window), args.split, args.seed);
    const double acc = stn::evaluate_baseline(stn::FrameModel{model}, windows);
    std::cout << "accuracy," << acc << '\n';
    return kExitOk;
}

int run_stream(const StreamArgs& args) {
    auto model = stn::load_weights(args.weights);
    auto dataset = stn::load_dataset(args.data);
    check_dataset_matches(dataset, model.config);
    const int stride = args.stride > 0 ? args.stride : model.config.window;

    stn::StreamEngine engine(model, stride);
    for (std::size_t clip_idx = 0; clip_idx < dataset.clips.size(); ++clip_idx) {
        engine.reset();
        for (int f = 0; f < dataset.frames_per_clip; ++f) {
            auto frame = stn::frame_tensor(dataset, dataset.clips[clip_idx], f);
            if (auto p = engine.push_frame(frame)) {
                std::cout << clip_idx << ',' << p->frame_index << ',' << p->label;
                for (float prob : p->probabilities) std::cout << ',' << prob;
                std::cout << '\n';
            }
        }
    }
    return kExitOk;
}

int run_estimate(const EstimateArgs& args) {
    auto cfg = stn::load_model_config(args.config_path);
    const auto mode = args.ma_mode == "pairs" ? stn::HeadActivationMode::consecutive_pairs
                                              : stn::HeadActivationMode::window_buffer;
    auto report = stn::totals(cfg, args.bytes_per_value, mode);
    std::cout << stn::render_report_table(report) << '\n';
    std::cout << stn::render_report_csv(report);

    if (args.mem_budget || args.ops_budget) {
        stn::DeviceBudget budget;
        budget.max_memory_bytes = args.mem_budget;
        budget.max_ops = args.ops_budget;
        auto verdict = stn::check_budget(report, budget);
        std::cout << "verdict," << (verdict.pass ? "pass" : "fail") << ',' << verdict.detail
                  << '\n';
        if (!verdict.pass) return kExitBudget;
    }
    return kExitOk;
}

int run_quantize(const QuantizeArgs& args) {
    auto model = stn::load_weights(args.weights);
    auto dataset = stn::load_dataset(args.data);
    check_dataset_matches(dataset, model.config);
    auto windows =
        select_split(stn::uniform_windows(dataset, model.config.window), args.split, args.seed);
    if (windows.empty()) throw stn::InputError("no calibration windows");

    const std::size_t calib_n =
        std::min<std::size_t>(windows.size(), static_cast<std::size_t>(args.calibration_windows));
    auto qmodel = stn::calibrate(
        model, std::span<const stn::WindowSample>(windows.data(), calib_n));
    stn::save_quantized(qmodel, args.out);

    std::size_t float_correct = 0, quant_correct = 0, agree = 0;
    for (const auto& s : windows) {
        const auto fl = stn::classify_window(model, s.frames);
        const auto qu = stn::classify_window_quantized(qmodel, s.frames);
        if (fl.label == s.label) ++float_correct;
        if (qu.label == s.label) ++quant_correct;
        if (fl.label == qu.label) ++agree;
    }
    const double n = static_cast<double>(windows.size());
    std::cout << "float_acc," << float_correct / n << '\n';
    std::cout << "quant_acc," << quant_correct / n << '\n';
    std::cout << "agreement," << agree / n << '\n';
    return kExitOk;
}

int run_bench(const BenchArgs& args) {
    auto model = stn::load_weights(args.weights);
    const auto& cfg = model.config;

    std::mt19937 rng(args.seed);
    std::vector<stn::Tensor3> frames;
    for (int i = 0; i < args.frames; ++i) {
        stn::Tensor3 f(cfg.input_height, cfg.input_width, cfg.input_channels);
        for (auto& v : f.data) v = static_cast<float>(stn::uniform_range(rng, 0.0, 1.0));
        frames.push_back(std::move(f));
    }

    stn::StreamEngine engine(model, args.stride > 0 ? args.stride : 1);
    int predictions = 0;
    const auto start = std::chrono::steady_clock::now();
    for (const auto& f : frames) {
        if (engine.push_frame(f)) ++predictions;
    }
    const auto stop = std::chrono::steady_clock::now();
    const double total_s = std::chrono::duration<double>(stop - start).count();
    const double ms_per_frame = 1000.0 * total_s / args.frames;

    std::cout << "frames," << args.frames << '\n';
    std::cout << "predictions," << predictions << '\n';
    std::cout << "ms_per_frame," << ms_per_frame << '\n';
    std::cout << "frames_per_second," << (total_s > 0 ? args.frames / total_s : 0.0) << '\n';
    if (predictions > 0) {
        std::cout << "ms_per_inference," << 1000.0 * total_s / predictions << '\n';
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatial-temporal streaming video classifier toolkit"};
    app.require_subcommand(1);

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic motion dataset");
    gen_cmd->add_option("--out", gen.out, "Output dataset file")->required();
    gen_cmd->add_option("--clips-per-class", gen.spec.clips_per_class);
    gen_cmd->add_option("--frames", gen.spec.frames_per_clip);
    gen_cmd->add_option("--height", gen.spec.height);
    gen_cmd->add_option("--width", gen.spec.width);
    gen_cmd->add_option("--channels", gen.spec.channels);
    gen_cmd->add_option("--classes", gen.spec.classes);
    gen_cmd->add_option("--noise", gen.spec.noise_amplitude);
    gen_cmd->add_option("--seed", gen.spec.seed);

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train on a dataset and save weights");
    train_cmd->add_option("--config", tr.config_path, "Model config file")->required();
    train_cmd->add_option("--data", tr.data_path, "Dataset file")->required();
    train_cmd->add_option("--out", tr.out_path, "Output weight file")->required();
    train_cmd->add_option("--history", tr.history_path, "Also write the history CSV here");
    train_cmd->add_option("--epochs", tr.hyper.epochs);
    train_cmd->add_option("--lr", tr.hyper.learning_rate);
    train_cmd->add_option("--momentum", tr.hyper.momentum);
    train_cmd->add_option("--batch", tr.hyper.batch_size);
    train_cmd->add_option("--seed", tr.hyper.seed, "Seed for split, shuffle and init");
    train_cmd->add_flag("--augment", tr.hyper.augment, "Random flip + small rotation");
    train_cmd->add_option("--flip-prob", tr.hyper.flip_probability);
    train_cmd->add_option("--rot-limit", tr.hyper.rotation_limit_deg);
    train_cmd->add_flag("--baseline", tr.baseline,
                        "Train the frame-by-frame model on the same windows");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate weights on a dataset");
    eval_cmd->add_option("--weights", ev.weights)->required();
    eval_cmd->add_option("--data", ev.data)->required();
    eval_cmd->add_option("--split", ev.split, "all|train|val|test");
    eval_cmd->add_option("--seed", ev.seed, "Split seed (match the training seed)");

    BaselineArgs bl;
    auto* bl_cmd = app.add_subcommand("eval-baseline",
                                      "Evaluate a frame model with majority voting");
    bl_cmd->add_option("--weights", bl.weights, "Window-1 weight file")->required();
    bl_cmd->add_option("--data", bl.data)->required();
    bl_cmd->add_option("--window", bl.window, "Votes per window (default: clip length)");
    bl_cmd->add_option("--split", bl.split, "all|train|val|test");
    bl_cmd->add_option("--seed", bl.seed, "Split seed (match the training seed)");

    StreamArgs st;
    auto* stream_cmd = app.add_subcommand("stream", "Stream a dataset clip by clip");
    stream_cmd->add_option("--weights", st.weights)->required();
    stream_cmd->add_option("--data", st.data)->required();
    stream_cmd->add_option("--stride", st.stride, "Prediction stride (default: window)");

    EstimateArgs es;
    auto* est_cmd = app.add_subcommand("estimate", "Analytical memory/ops report");
    est_cmd->add_option("--config", es.config_path)->required();
    est_cmd->add_option("--bytes-per-value", es.bytes_per_value, "1 for int8, 4 for float32");
    est_cmd->add_option("--mem-budget", es.mem_budget, "Max memory in bytes");
    est_cmd->add_option("--ops-budget", es.ops_budget, "Max ops per prediction");
    est_cmd->add_option("--ma-mode", es.ma_mode, "buffer|pairs head activation accounting");

    QuantizeArgs qu;
    auto* quant_cmd = app.add_subcommand("quantize", "Int8 post-training quantization");
    quant_cmd->add_option("--weights", qu.weights)->required();
    quant_cmd->add_option("--data", qu.data, "Calibration/evaluation dataset")->required();
    quant_cmd->add_option("--out", qu.out, "Output quantized file")->required();
    quant_cmd->add_option("--calib-count", qu.calibration_windows);
    quant_cmd->add_option("--split", qu.split, "all|train|val|test");
    quant_cmd->add_option("--seed", qu.seed);

    BenchArgs be;
    auto* bench_cmd = app.add_subcommand("bench", "Measure streaming throughput");
    bench_cmd->add_option("--weights", be.weights)->required();
    bench_cmd->add_option("--frames", be.frames);
    bench_cmd->add_option("--stride", be.stride);
    bench_cmd->add_option("--seed", be.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (app.got_subcommand(gen_cmd)) return run_gen_data(gen);
        if (app.got_subcommand(train_cmd)) return run_train(tr);
        if (app.got_subcommand(eval_cmd)) return run_eval(ev);
        if (app.got_subcommand(bl_cmd)) return run_eval_baseline(bl);
        if (app.got_subcommand(stream_cmd)) return run_stream(st);
        if (app.got_subcommand(est_cmd)) return run_estimate(es);
        if (app.got_subcommand(quant_cmd)) return run_quantize(qu);
        if (app.got_subcommand(bench_cmd)) return run_bench(be);
    } catch (const stn::FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const stn::InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const stn::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const stn::StateError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
