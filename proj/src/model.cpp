#include "stn/model.hpp"

#include <cmath>
#include <random>

#include "stn/io.hpp"

namespace stn {

int ModelConfig::output_height() const {
    int h = input_height;
    for (int i = 0; i < conv_blocks(); ++i) h /= 2;
    return h;
}

int ModelConfig::output_width() const {
    int w = input_width;
    for (int i = 0; i < conv_blocks(); ++i) w /= 2;
    return w;
}

void ModelConfig::validate() const {
    if (input_height < 1 || input_width < 1 || input_channels < 1) {
        throw ConfigError("input dims must be >= 1");
    }
    if (window < 1) throw ConfigError("observation window T must be >= 1");
    if (classes < 2) throw ConfigError("class count k must be >= 2");
    if (conv_filters.empty()) throw ConfigError("at least one conv block required");
    if (conv_filters.size() != conv_kernels.size()) {
        throw ConfigError("conv filter and kernel lists differ in length");
    }
    if (dense_units.empty()) throw ConfigError("at least one dense layer required");
    for (std::size_t i = 0; i < conv_filters.size(); ++i) {
        if (conv_filters[i] < 1) {
            throw ConfigError("conv block " + std::to_string(i + 1) + ": filter count must be >= 1");
        }
        if (conv_kernels[i] < 1) {
            throw ConfigError("conv block " + std::to_string(i + 1) + ": kernel size must be >= 1");
        }
    }
    for (std::size_t j = 0; j < dense_units.size(); ++j) {
        if (dense_units[j] < 1) {
            throw ConfigError("dense layer " + std::to_string(j + 1) + ": unit count must be >= 1");
        }
    }
    int h = input_height;
    int w = input_width;
    for (int i = 0; i < conv_blocks(); ++i) {
        if (h < 2 || w < 2) {
            throw ConfigError("conv block " + std::to_string(i + 1) + ": feature map " +
                              std::to_string(h) + "x" + std::to_string(w) +
                              " is smaller than the 2x2 pooling window");
        }
        h /= 2;
        w /= 2;
    }
    const std::uint64_t in_values = static_cast<std::uint64_t>(input_height) * input_width *
                                    input_channels;
    const std::uint64_t out_values = static_cast<std::uint64_t>(h) * w * conv_filters.back();
    if (in_values <= out_values) {
        throw ConfigError("feature extractor must reduce dimensionality: input " +
                          std::to_string(in_values) + " values, output " +
                          std::to_string(out_values));
    }
}

namespace {

// Deterministic, platform-independent uniform draw in (-bound, bound).
float uniform_symmetric(std::mt19937& rng, float bound) {
    const double u = (static_cast<double>(rng()) + 0.5) / 4294967296.0;
    return static_cast<float>((2.0 * u - 1.0) * bound);
}

void init_uniform(std::mt19937& rng, std::vector<float>& weights, int fan_in) {
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    for (float& w : weights) w = uniform_symmetric(rng, bound);
}

} // namespace

Model build_model(const ModelConfig& config, std::uint32_t seed) {
    config.validate();
    Model model;
    model.config = config;
    model.params = make_zero_params<float>(config);

    std::mt19937 rng(seed);
    for (auto& block : model.params.conv_blocks) {
        init_uniform(rng, block.weights,
                     block.kernel_size * block.kernel_size * block.in_channels);
    }
    init_uniform(rng, model.params.temporal.weights, model.params.temporal.window);
    for (auto& layer : model.params.dense_layers) {
        init_uniform(rng, layer.weights, layer.in_features);
    }
    return model;
}

FeatureMap extract_features(const Model& model, const Tensor3& frame) {
    return extract_features_t(model.config, model.params, frame);
}

Tensor3 temporal_combine(const TemporalConvParams& params, std::span<const Tensor3> window) {
    return temporal_combine_t(params, window);
}

Classification classify_window(const Model& model, std::span<const Tensor3> frames) {
    Classification result;
    result.probabilities = classify_window_probs_t(model.config, model.params, frames);
    result.label =
        static_cast<int>(argmax_lowest(std::span<const float>(result.probabilities)));
    return result;
}

std::uint64_t non_bias_parameter_count(const Model& model) {
    std::uint64_t count = 0;
    for (const auto& block : model.params.conv_blocks) count += block.weights.size();
    count += model.params.temporal.weights.size();
    for (const auto& layer : model.params.dense_layers) count += layer.weights.size();
    return count;
}

void write_config(BinaryWriter& out, const ModelConfig& config) {
    out.write_u32(static_cast<std::uint32_t>(config.input_height));
    out.write_u32(static_cast<std::uint32_t>(config.input_width));
    out.write_u32(static_cast<std::uint32_t>(config.input_channels));
    out.write_u32(static_cast<std::uint32_t>(config.window));
    out.write_u32(static_cast<std::uint32_t>(config.conv_filters.size()));
    for (int n : config.conv_filters) out.write_u32(static_cast<std::uint32_t>(n));
    out.write_u32(static_cast<std::uint32_t>(config.conv_kernels.size()));
    for (int r : config.conv_kernels) out.write_u32(static_cast<std::uint32_t>(r));
    out.write_u32(static_cast<std::uint32_t>(config.dense_units.size()));
    for (int d : config.dense_units) out.write_u32(static_cast<std::uint32_t>(d));
    out.write_u32(static_cast<std::uint32_t>(config.classes));
}

namespace {

std::uint32_t read_count(BinaryReader& in, const char* what, std::uint32_t limit) {
    const std::size_t at = in.offset();
    const std::uint32_t v = in.read_u32();
    if (v == 0 || v > limit) {
        throw FormatError("'" + in.path() + "': implausible " + std::string(what) + " " +
                          std::to_string(v) + " at byte " + std::to_string(at));
    }
    return v;
}

} // namespace

ModelConfig read_config(BinaryReader& in) {
    ModelConfig config;
    config.input_height = static_cast<int>(read_count(in, "input height", 1u << 16));
    config.input_width = static_cast<int>(read_count(in, "input width", 1u << 16));
    config.input_channels = static_cast<int>(read_count(in, "input channels", 1u << 16));
    config.window = static_cast<int>(read_count(in, "window", 1u << 16));
    const std::uint32_t l = read_count(in, "conv block count", 64);
    config.conv_filters.resize(l);
    for (auto& n : config.conv_filters) n = static_cast<int>(read_count(in, "filter count", 1u << 20));
    const std::uint32_t lr = read_count(in, "kernel list length", 64);
    if (lr != l) {
        throw FormatError("'" + in.path() + "': kernel list length " + std::to_string(lr) +
                          " does not match conv block count " + std::to_string(l));
    }
    config.conv_kernels.resize(lr);
    for (auto& r : config.conv_kernels) r = static_cast<int>(read_count(in, "kernel size", 1u << 10));
    const std::uint32_t b = read_count(in, "dense layer count", 64);
    config.dense_units.resize(b);
    for (auto& d : config.dense_units) d = static_cast<int>(read_count(in, "dense units", 1u << 24));
    config.classes = static_cast<int>(read_count(in, "class count", 1u << 20));
    config.validate();
    return config;
}

namespace {

constexpr char kWeightMagic[5] = "STNW";
constexpr std::uint32_t kWeightVersion = 1;

void read_layer_f32(BinaryReader& in, std::vector<float>& values, const std::string& layer) {
    try {
        in.read_f32_array(values);
    } catch (const FormatError& e) {
        throw FormatError(std::string("while reading ") + layer + ": " + e.what());
    }
}

} // namespace

void save_weights(const Model& model, const std::string& path) {
    BinaryWriter out(path);
    out.write_magic(kWeightMagic);
    out.write_u32(kWeightVersion);
    write_config(out, model.config);
    for (const auto& block : model.params.conv_blocks) {
        out.write_f32_array(block.weights);
        out.write_f32_array(block.biases);
    }
    out.write_f32_array(model.params.temporal.weights);
    out.write_f32_array(model.params.temporal.biases);
    for (const auto& layer : model.params.dense_layers) {
        out.write_f32_array(layer.weights);
        out.write_f32_array(layer.biases);
    }
}

Model load_weights(const std::string& path) {
    BinaryReader in(path);
    in.expect_magic(kWeightMagic);
    in.expect_version(kWeightVersion);

    Model model;
    model.config = read_config(in);
    model.params = make_zero_params<float>(model.config);

    for (std::size_t i = 0; i < model.params.conv_blocks.size(); ++i) {
        auto& block = model.params.conv_blocks[i];
        const std::string name = "conv block " + std::to_string(i + 1);
        read_layer_f32(in, block.weights, name + " weights");
        read_layer_f32(in, block.biases, name + " biases");
    }
    read_layer_f32(in, model.params.temporal.weights, "temporal conv weights");
    read_layer_f32(in, model.params.temporal.biases, "temporal conv biases");
    for (std::size_t j = 0; j < model.params.dense_layers.size(); ++j) {
        auto& layer = model.params.dense_layers[j];
        const std::string name = j + 1 == model.params.dense_layers.size()
                                     ? std::string("softmax layer")
                                     : "dense layer " + std::to_string(j + 1);
        read_layer_f32(in, layer.weights, name + " weights");
        read_layer_f32(in, layer.biases, name + " biases");
    }
    if (!in.at_end()) {
        throw FormatError("'" + path + "': trailing bytes after parameters at byte " +
                          std::to_string(in.offset()));
    }
    return model;
}

} // namespace stn
