#ifndef STN_MODEL_HPP
#define STN_MODEL_HPP

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stn/kernels.hpp"
#include "stn/tensor.hpp"

namespace stn {

class BinaryReader;
class BinaryWriter;

// ---------------------------------------------------------------------------
// Architecture description: l conv+pool blocks for the spatial extractor,
// per-channel 1x1 temporal convolutions over a window of T feature maps,
// then a dense head ending in a softmax layer with `classes` outputs.
// ---------------------------------------------------------------------------

struct ModelConfig {
    int input_height = 0;
    int input_width = 0;
    int input_channels = 0;
    int window = 0;                 // T
    std::vector<int> conv_filters;  // n, one per block
    std::vector<int> conv_kernels;  // r, one per block
    std::vector<int> dense_units;   // d, hidden layers only
    int classes = 0;                // k

    int conv_blocks() const { return static_cast<int>(conv_filters.size()); }
    int hidden_dense_layers() const { return static_cast<int>(dense_units.size()); }

    // Each pooling stage halves the spatial dims (flooring odd sizes).
    int output_height() const;
    int output_width() const;
    int output_channels() const { return conv_filters.back(); }
    std::size_t feature_size() const {
        return static_cast<std::size_t>(output_height()) * output_width() * output_channels();
    }

    // Throws ConfigError if any invariant fails; errors name the offending
    // block where one exists.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

// Per-channel 1x1 temporal convolution: each output channel c combines the
// T values of channel c across the window. t = 0 is the oldest frame.
template <class R>
struct TemporalConvParamsT {
    int channels = 0;
    int window = 0;
    std::vector<R> weights;  // (channel, t) row-major
    std::vector<R> biases;   // one per channel

    static TemporalConvParamsT zeros(int channels, int window) {
        if (channels < 1 || window < 1) {
            throw ConfigError("temporal conv dims must be >= 1");
        }
        TemporalConvParamsT p;
        p.channels = channels;
        p.window = window;
        p.weights.assign(static_cast<std::size_t>(channels) * window, R(0));
        p.biases.assign(static_cast<std::size_t>(channels), R(0));
        return p;
    }

    std::size_t weight_index(int channel, int t) const {
        return static_cast<std::size_t>(channel) * window + t;
    }

    void validate() const {
        if (weights.size() != static_cast<std::size_t>(channels) * window ||
            biases.size() != static_cast<std::size_t>(channels)) {
            throw ConfigError("temporal conv parameter count mismatch");
        }
    }
};

using TemporalConvParams = TemporalConvParamsT<float>;

// All learnable parameters. dense_layers holds the hidden layers followed by
// the softmax output layer, so its length is hidden_dense_layers() + 1.
template <class R>
struct ModelParamsT {
    std::vector<ConvLayerParamsT<R>> conv_blocks;
    TemporalConvParamsT<R> temporal;
    std::vector<DenseLayerParamsT<R>> dense_layers;
};

using ModelParams = ModelParamsT<float>;

struct Model {
    ModelConfig config;
    ModelParams params;
};

using FeatureMap = Tensor3;
using FeatureWindow = std::vector<Tensor3>;

// ---------------------------------------------------------------------------
// Forward passes (templated so test oracles can run them in double).
// ---------------------------------------------------------------------------

// Shapes parameters for `config`, all values zero.
template <class R>
ModelParamsT<R> make_zero_params(const ModelConfig& config) {
    ModelParamsT<R> params;
    int ch = config.input_channels;
    for (int i = 0; i < config.conv_blocks(); ++i) {
        params.conv_blocks.push_back(
            ConvLayerParamsT<R>::zeros(config.conv_kernels[i], ch, config.conv_filters[i]));
        ch = config.conv_filters[i];
    }
    params.temporal = TemporalConvParamsT<R>::zeros(config.output_channels(), config.window);
    std::size_t in_f = config.feature_size();
    for (int j = 0; j < config.hidden_dense_layers(); ++j) {
        params.dense_layers.push_back(
            DenseLayerParamsT<R>::zeros(static_cast<int>(in_f), config.dense_units[j]));
        in_f = static_cast<std::size_t>(config.dense_units[j]);
    }
    params.dense_layers.push_back(
        DenseLayerParamsT<R>::zeros(static_cast<int>(in_f), config.classes));
    return params;
}

template <class R, class S>
ModelParamsT<R> params_cast(const ModelParamsT<S>& src) {
    ModelParamsT<R> out;
    for (const auto& cb : src.conv_blocks) {
        ConvLayerParamsT<R> p;
        p.kernel_size = cb.kernel_size;
        p.in_channels = cb.in_channels;
        p.out_channels = cb.out_channels;
        p.weights.assign(cb.weights.begin(), cb.weights.end());
        p.biases.assign(cb.biases.begin(), cb.biases.end());
        out.conv_blocks.push_back(std::move(p));
    }
    out.temporal.channels = src.temporal.channels;
    out.temporal.window = src.temporal.window;
    out.temporal.weights.assign(src.temporal.weights.begin(), src.temporal.weights.end());
    out.temporal.biases.assign(src.temporal.biases.begin(), src.temporal.biases.end());
    for (const auto& dl : src.dense_layers) {
        DenseLayerParamsT<R> p;
        p.in_features = dl.in_features;
        p.out_features = dl.out_features;
        p.weights.assign(dl.weights.begin(), dl.weights.end());
        p.biases.assign(dl.biases.begin(), dl.biases.end());
        out.dense_layers.push_back(std::move(p));
    }
    return out;
}

// Spatial extractor g: l x (conv -> relu -> pool).
template <class R>
Tensor3T<R> extract_features_t(const ModelConfig& config, const ModelParamsT<R>& params,
                               const Tensor3T<R>& frame) {
    if (frame.height != config.input_height || frame.width != config.input_width ||
        frame.channels != config.input_channels) {
        throw InputError("frame dims do not match model input dims");
    }
    Tensor3T<R> x = frame;
    for (const auto& block : params.conv_blocks) {
        Tensor3T<R> z = conv2d(x, block);
        relu_inplace(std::span<R>(z.data));
        x = maxpool2x2(z).output;
    }
    return x;
}

// Per-channel temporal 1x1 convolution over the full window (oldest first).
template <class R>
Tensor3T<R> temporal_combine_t(const TemporalConvParamsT<R>& params,
                               std::span<const Tensor3T<R>> window) {
    if (window.size() != static_cast<std::size_t>(params.window)) {
        throw StateError("temporal_combine: window holds " + std::to_string(window.size()) +
                         " maps, expected " + std::to_string(params.window));
    }
    const Tensor3T<R>& first = window[0];
    if (first.channels != params.channels) {
        throw InputError("temporal_combine: channel mismatch");
    }
    Tensor3T<R> out(first.height, first.width, first.channels);
    const int ch = params.channels;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = params.biases[i % ch];
    }
    for (int t = 0; t < params.window; ++t) {
        const Tensor3T<R>& map = window[t];
        if (!map.same_shape(first)) {
            throw InputError("temporal_combine: window maps differ in shape");
        }
        const R* w = &params.weights[t];  // stride `window` walks the channel axis
        for (std::size_t i = 0; i < out.size(); ++i) {
            out.data[i] += w[(i % ch) * params.window] * map.data[i];
        }
    }
    count_ops(static_cast<std::uint64_t>(ch) * params.window * first.height * first.width);
    return out;
}

// Dense head on the flattened combined map: b x (dense -> relu), then the
// softmax output layer. Returns the logits.
template <class R>
std::vector<R> head_logits_t(const ModelParamsT<R>& params, const Tensor3T<R>& combined) {
    std::vector<R> v = combined.data;
    const std::size_t hidden = params.dense_layers.size() - 1;
    for (std::size_t j = 0; j < hidden; ++j) {
        v = dense(std::span<const R>(v), params.dense_layers[j]);
        relu_inplace(std::span<R>(v));
    }
    return dense(std::span<const R>(v), params.dense_layers[hidden]);
}

template <class R>
std::vector<R> classify_window_probs_t(const ModelConfig& config, const ModelParamsT<R>& params,
                                       std::span<const Tensor3T<R>> frames) {
    if (frames.size() != static_cast<std::size_t>(config.window)) {
        throw InputError("classify_window: got " + std::to_string(frames.size()) +
                         " frames, model window is " + std::to_string(config.window));
    }
    std::vector<Tensor3T<R>> window;
    window.reserve(frames.size());
    for (const auto& frame : frames) {
        window.push_back(extract_features_t(config, params, frame));
    }
    Tensor3T<R> combined = temporal_combine_t(params.temporal, std::span<const Tensor3T<R>>(window));
    std::vector<R> logits = head_logits_t(params, combined);
    return softmax(std::span<const R>(logits));
}

// ---------------------------------------------------------------------------
// Float model API.
// ---------------------------------------------------------------------------

// Deterministic initialization: weights uniform in +/- sqrt(6 / fan_in),
// biases zero. The same seed and config always produce bit-identical
// parameters.
Model build_model(const ModelConfig& config, std::uint32_t seed);

FeatureMap extract_features(const Model& model, const Tensor3& frame);

Tensor3 temporal_combine(const TemporalConvParams& params, std::span<const Tensor3> window);

struct Classification {
    int label = 0;
    std::vector<float> probabilities;
};

// Frames ordered oldest first. Argmax ties resolve to the lowest class index.
Classification classify_window(const Model& model, std::span<const Tensor3> frames);

// Weight count excluding biases; matches the resource model's m_w.
std::uint64_t non_bias_parameter_count(const Model& model);

// Weight file ("STNW", version 1, little-endian): config block, then per
// layer weights followed by biases, conv blocks first, temporal next, dense
// layers last.
void save_weights(const Model& model, const std::string& path);
Model load_weights(const std::string& path);

void write_config(BinaryWriter& out, const ModelConfig& config);
ModelConfig read_config(BinaryReader& in);

} // namespace stn

#endif
