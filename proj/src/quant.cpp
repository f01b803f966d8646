#include "stn/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stn/io.hpp"

namespace stn {

namespace {
constexpr int kSignedMin = -127;
constexpr int kSignedMax = 127;
constexpr int kUnsignedMin = 0;
constexpr int kUnsignedMax = 255;
constexpr float kRangeEpsilon = 1e-6f;

long round_away(double v) { return std::lround(v); }
} // namespace

int quantize_value(float v, const QuantParams& params, bool signed_range) {
    const long q = round_away(static_cast<double>(v) / params.scale) + params.zero_point;
    const long lo = signed_range ? kSignedMin : kUnsignedMin;
    const long hi = signed_range ? kSignedMax : kUnsignedMax;
    return static_cast<int>(std::clamp(q, lo, hi));
}

float dequantize_value(int q, const QuantParams& params) {
    return static_cast<float>(q - params.zero_point) * params.scale;
}

std::vector<std::int8_t> quantize_signed(std::span<const float> values,
                                         const QuantParams& params) {
    std::vector<std::int8_t> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = static_cast<std::int8_t>(quantize_value(values[i], params, true));
    }
    return out;
}

std::vector<std::uint8_t> quantize_unsigned(std::span<const float> values,
                                            const QuantParams& params) {
    std::vector<std::uint8_t> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(quantize_value(values[i], params, false));
    }
    return out;
}

QuantParams symmetric_params(std::span<const float> values) {
    float amax = 0.0f;
    for (float v : values) amax = std::max(amax, std::abs(v));
    if (amax < kRangeEpsilon) amax = kRangeEpsilon;
    return QuantParams{amax / static_cast<float>(kSignedMax), 0};
}

QuantParams asymmetric_params(float lo, float hi) {
    lo = std::min(lo, 0.0f);
    hi = std::max(hi, 0.0f);
    if (hi - lo < kRangeEpsilon) hi = lo + kRangeEpsilon;
    QuantParams p;
    p.scale = (hi - lo) / static_cast<float>(kUnsignedMax);
    p.zero_point = static_cast<int>(std::clamp<long>(
        round_away(-static_cast<double>(lo) / p.scale), kUnsignedMin, kUnsignedMax));
    return p;
}

// ---------------------------------------------------------------------------
// Calibration.
// ---------------------------------------------------------------------------

namespace {

struct RangeTracker {
    float lo = std::numeric_limits<float>::max();
    float hi = std::numeric_limits<float>::lowest();

    void observe(std::span<const float> values) {
        for (float v : values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
};

} // namespace

QuantizedModel calibrate(const Model& model, std::span<const WindowSample> calibration_windows) {
    if (calibration_windows.empty()) {
        throw InputError("calibrate: need at least one calibration window");
    }
    const ModelConfig& cfg = model.config;

    QuantizedModel q;
    q.config = cfg;
    for (const auto& block : model.params.conv_blocks) {
        QuantizedTensor t;
        t.params = symmetric_params(block.weights);
        t.values = quantize_signed(block.weights, t.params);
        q.conv_weights.push_back(std::move(t));
        q.conv_biases.push_back(block.biases);
    }
    q.temporal_weights.params = symmetric_params(model.params.temporal.weights);
    q.temporal_weights.values =
        quantize_signed(model.params.temporal.weights, q.temporal_weights.params);
    q.temporal_biases = model.params.temporal.biases;
    for (const auto& layer : model.params.dense_layers) {
        QuantizedTensor t;
        t.params = symmetric_params(layer.weights);
        t.values = quantize_signed(layer.weights, t.params);
        q.dense_weights.push_back(std::move(t));
        q.dense_biases.push_back(layer.biases);
    }

    // Observe activation ranges with float forward passes.
    const std::size_t l = static_cast<std::size_t>(cfg.conv_blocks());
    const std::size_t hidden = static_cast<std::size_t>(cfg.hidden_dense_layers());
    std::vector<RangeTracker> trackers(l + hidden + 2);

    for (const WindowSample& sample : calibration_windows) {
        if (sample.frames.size() != static_cast<std::size_t>(cfg.window)) {
            throw InputError("calibrate: window length does not match model window");
        }
        FeatureWindow features;
        features.reserve(sample.frames.size());
        for (const Tensor3& frame : sample.frames) {
            trackers[0].observe(frame.data);
            Tensor3 x = frame;
            for (std::size_t i = 0; i < l; ++i) {
                Tensor3 z = conv2d(x, model.params.conv_blocks[i]);
                relu_inplace(std::span<float>(z.data));
                trackers[1 + i].observe(z.data);
                x = maxpool2x2(z).output;
            }
            features.push_back(std::move(x));
        }
        Tensor3 combined =
            temporal_combine(model.params.temporal, std::span<const Tensor3>(features));
        trackers[1 + l].observe(combined.data);
        std::vector<float> v = combined.data;
        for (std::size_t j = 0; j < hidden; ++j) {
            v = dense(std::span<const float>(v), model.params.dense_layers[j]);
            relu_inplace(std::span<float>(v));
            trackers[2 + l + j].observe(v);
        }
    }

    q.activation_sites.reserve(trackers.size());
    for (const RangeTracker& t : trackers) {
        q.activation_sites.push_back(asymmetric_params(t.lo, t.hi));
    }
    return q;
}

// ---------------------------------------------------------------------------
// Integer inference.
// ---------------------------------------------------------------------------

namespace {

struct QTensor {
    int height = 0, width = 0, channels = 0;
    std::vector<std::uint8_t> data;

    QTensor() = default;
    QTensor(int h, int w, int c)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, 0) {}

    std::size_t index(int m, int n, int c) const {
        return (static_cast<std::size_t>(m) * width + n) * channels + c;
    }
};

std::int32_t fold_bias(float bias, float in_scale, float w_scale) {
    const double folded = static_cast<double>(bias) / (static_cast<double>(in_scale) * w_scale);
    return static_cast<std::int32_t>(std::clamp<double>(
        std::round(folded), std::numeric_limits<std::int32_t>::min(),
        std::numeric_limits<std::int32_t>::max()));
}

std::uint8_t requantize(std::int32_t acc, double multiplier, int zero_point) {
    const long q = round_away(acc * multiplier) + zero_point;
    return static_cast<std::uint8_t>(std::clamp<long>(q, kUnsignedMin, kUnsignedMax));
}

// Integer same-padding conv; requantizes into the output site and applies
// relu as a clamp at the output zero point.
QTensor conv2d_quantized(const QTensor& input, const QuantizedTensor& weights,
                         const std::vector<float>& biases, int kernel, int in_ch, int out_ch,
                         const QuantParams& in_site, const QuantParams& out_site) {
    const int m_dim = input.height;
    const int n_dim = input.width;
    const int pad = (kernel - 1) / 2;
    const double multiplier = static_cast<double>(in_site.scale) * weights.params.scale /
                              out_site.scale;

    std::vector<std::int32_t> folded(biases.size());
    for (std::size_t o = 0; o < biases.size(); ++o) {
        folded[o] = fold_bias(biases[o], in_site.scale, weights.params.scale);
    }

    QTensor out(m_dim, n_dim, out_ch);
    std::vector<std::int32_t> acc(static_cast<std::size_t>(out_ch));
    for (int m = 0; m < m_dim; ++m) {
        for (int n = 0; n < n_dim; ++n) {
            for (int o = 0; o < out_ch; ++o) acc[static_cast<std::size_t>(o)] = folded[o];
            for (int ky = 0; ky < kernel; ++ky) {
                const int sm = m + ky - pad;
                if (sm < 0 || sm >= m_dim) continue;
                for (int kx = 0; kx < kernel; ++kx) {
                    const int sn = n + kx - pad;
                    if (sn < 0 || sn >= n_dim) continue;
                    const std::uint8_t* in_row = &input.data[input.index(sm, sn, 0)];
                    for (int c = 0; c < in_ch; ++c) {
                        const std::int32_t x = static_cast<std::int32_t>(in_row[c]) -
                                               in_site.zero_point;
                        const std::size_t w_base =
                            ((static_cast<std::size_t>(ky) * kernel + kx) * in_ch + c) * out_ch;
                        for (int o = 0; o < out_ch; ++o) {
                            acc[static_cast<std::size_t>(o)] +=
                                x * weights.values[w_base + static_cast<std::size_t>(o)];
                        }
                    }
                }
            }
            for (int o = 0; o < out_ch; ++o) {
                std::uint8_t v = requantize(acc[static_cast<std::size_t>(o)], multiplier,
                                            out_site.zero_point);
                v = std::max<std::uint8_t>(v, static_cast<std::uint8_t>(out_site.zero_point));
                out.data[out.index(m, n, o)] = v;
            }
        }
    }
    return out;
}

QTensor maxpool2x2_quantized(const QTensor& input) {
    QTensor out(input.height / 2, input.width / 2, input.channels);
    for (int m = 0; m < out.height; ++m) {
        for (int n = 0; n < out.width; ++n) {
            for (int c = 0; c < input.channels; ++c) {
                std::uint8_t best = input.data[input.index(2 * m, 2 * n, c)];
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        best = std::max(best,
                                        input.data[input.index(2 * m + dy, 2 * n + dx, c)]);
                    }
                }
                out.data[out.index(m, n, c)] = best;
            }
        }
    }
    return out;
}

std::vector<std::int32_t> dense_quantized_acc(std::span<const std::uint8_t> input,
                                              const QuantizedTensor& weights,
                                              const std::vector<float>& biases, int in_f,
                                              int out_f, const QuantParams& in_site) {
    std::vector<std::int32_t> acc(static_cast<std::size_t>(out_f));
    for (int j = 0; j < out_f; ++j) {
        acc[static_cast<std::size_t>(j)] =
            fold_bias(biases[static_cast<std::size_t>(j)], in_site.scale, weights.params.scale);
    }
    for (int i = 0; i < in_f; ++i) {
        const std::int32_t x = static_cast<std::int32_t>(input[static_cast<std::size_t>(i)]) -
                               in_site.zero_point;
        const std::int8_t* w = &weights.values[static_cast<std::size_t>(i) * out_f];
        for (int j = 0; j < out_f; ++j) acc[static_cast<std::size_t>(j)] += x * w[j];
    }
    return acc;
}

} // namespace

Classification classify_window_quantized(const QuantizedModel& q,
                                         std::span<const Tensor3> frames) {
    const ModelConfig& cfg = q.config;
    if (frames.size() != static_cast<std::size_t>(cfg.window)) {
        throw InputError("classify_window_quantized: got " + std::to_string(frames.size()) +
                         " frames, model window is " + std::to_string(cfg.window));
    }
    if (q.activation_sites.size() != q.expected_sites()) {
        throw StateError("quantized model is missing activation calibration");
    }
    const std::size_t l = static_cast<std::size_t>(cfg.conv_blocks());

    // Spatial extractor per frame, all in the integer domain.
    std::vector<QTensor> features;
    features.reserve(frames.size());
    for (const Tensor3& frame : frames) {
        if (frame.height != cfg.input_height || frame.width != cfg.input_width ||
            frame.channels != cfg.input_channels) {
            throw InputError("classify_window_quantized: frame dims mismatch");
        }
        QTensor x(frame.height, frame.width, frame.channels);
        x.data = quantize_unsigned(frame.data, q.activation_sites[0]);
        int in_ch = cfg.input_channels;
        for (std::size_t i = 0; i < l; ++i) {
            x = conv2d_quantized(x, q.conv_weights[i], q.conv_biases[i], cfg.conv_kernels[i],
                                 in_ch, cfg.conv_filters[i], q.activation_sites[i],
                                 q.activation_sites[i + 1]);
            x = maxpool2x2_quantized(x);
            in_ch = cfg.conv_filters[i];
        }
        features.push_back(std::move(x));
    }

    // Temporal 1x1 combination across the window.
    const QuantParams& g_site = q.activation_sites[l];
    const QuantParams& t_site = q.activation_sites[l + 1];
    const int ch = cfg.output_channels();
    const int t_count = cfg.window;
    const double t_multiplier = static_cast<double>(g_site.scale) *
                                q.temporal_weights.params.scale / t_site.scale;
    QTensor combined(features[0].height, features[0].width, ch);
    {
        std::vector<std::int32_t> folded(static_cast<std::size_t>(ch));
        for (int c = 0; c < ch; ++c) {
            folded[static_cast<std::size_t>(c)] = fold_bias(
                q.temporal_biases[static_cast<std::size_t>(c)], g_site.scale,
                q.temporal_weights.params.scale);
        }
        for (std::size_t i = 0; i < combined.data.size(); ++i) {
            const int c = static_cast<int>(i % ch);
            std::int32_t acc = folded[static_cast<std::size_t>(c)];
            for (int t = 0; t < t_count; ++t) {
                const std::int32_t x =
                    static_cast<std::int32_t>(features[static_cast<std::size_t>(t)].data[i]) -
                    g_site.zero_point;
                acc += x * q.temporal_weights
                               .values[static_cast<std::size_t>(c) * t_count + t];
            }
            combined.data[i] = requantize(acc, t_multiplier, t_site.zero_point);
        }
    }

    // Dense head: hidden layers stay integer, logits are dequantized.
    std::vector<std::uint8_t> v = combined.data;
    std::size_t site = l + 1;
    int in_f = static_cast<int>(cfg.feature_size());
    const std::size_t hidden = q.dense_weights.size() - 1;
    for (std::size_t j = 0; j < hidden; ++j) {
        const int out_f = cfg.dense_units[j];
        auto acc = dense_quantized_acc(v, q.dense_weights[j], q.dense_biases[j], in_f, out_f,
                                       q.activation_sites[site]);
        const QuantParams& out_site = q.activation_sites[site + 1];
        const double multiplier = static_cast<double>(q.activation_sites[site].scale) *
                                  q.dense_weights[j].params.scale / out_site.scale;
        v.resize(static_cast<std::size_t>(out_f));
        for (int i = 0; i < out_f; ++i) {
            std::uint8_t qv = requantize(acc[static_cast<std::size_t>(i)], multiplier,
                                         out_site.zero_point);
            v[static_cast<std::size_t>(i)] =
                std::max<std::uint8_t>(qv, static_cast<std::uint8_t>(out_site.zero_point));
        }
        in_f = out_f;
        ++site;
    }

    auto acc = dense_quantized_acc(v, q.dense_weights[hidden], q.dense_biases[hidden], in_f,
                                   cfg.classes, q.activation_sites[site]);
    const double logit_scale = static_cast<double>(q.activation_sites[site].scale) *
                               q.dense_weights[hidden].params.scale;
    std::vector<float> logits(static_cast<std::size_t>(cfg.classes));
    for (int i = 0; i < cfg.classes; ++i) {
        logits[static_cast<std::size_t>(i)] =
            static_cast<float>(acc[static_cast<std::size_t>(i)] * logit_scale);
    }

    Classification result;
    result.probabilities = softmax(std::span<const float>(logits));
    result.label = static_cast<int>(argmax_lowest(std::span<const float>(result.probabilities)));
    return result;
}

// ---------------------------------------------------------------------------
// Serialization.
// ---------------------------------------------------------------------------

namespace {
constexpr char kQuantMagic[5] = "STNQ";
constexpr std::uint32_t kQuantVersion = 1;

void write_qtensor(BinaryWriter& out, const QuantizedTensor& t) {
    out.write_f32(t.params.scale);
    out.write_i32(t.params.zero_point);
    out.write_bytes(t.values.data(), t.values.size());
}

QuantParams read_qparams(BinaryReader& in) {
    const std::size_t at = in.offset();
    QuantParams p;
    p.scale = in.read_f32();
    p.zero_point = in.read_i32();
    if (!(p.scale > 0.0f) || !std::isfinite(p.scale)) {
        throw FormatError("'" + in.path() + "': non-positive scale at byte " +
                          std::to_string(at));
    }
    if (p.zero_point < kSignedMin || p.zero_point > kUnsignedMax) {
        throw FormatError("'" + in.path() + "': zero point out of range at byte " +
                          std::to_string(at));
    }
    return p;
}

QuantizedTensor read_qtensor(BinaryReader& in, std::size_t count) {
    QuantizedTensor t;
    t.params = read_qparams(in);
    t.values.resize(count);
    in.read_bytes(t.values.data(), count);
    return t;
}

void write_biases(BinaryWriter& out, const std::vector<float>& biases) {
    out.write_f32_array(biases);
}

} // namespace

void save_quantized(const QuantizedModel& q, const std::string& path) {
    BinaryWriter out(path);
    out.write_magic(kQuantMagic);
    out.write_u32(kQuantVersion);
    write_config(out, q.config);
    for (const auto& t : q.conv_weights) write_qtensor(out, t);
    write_qtensor(out, q.temporal_weights);
    for (const auto& t : q.dense_weights) write_qtensor(out, t);
    for (const auto& b : q.conv_biases) write_biases(out, b);
    write_biases(out, q.temporal_biases);
    for (const auto& b : q.dense_biases) write_biases(out, b);
    for (const QuantParams& site : q.activation_sites) {
        out.write_f32(site.scale);
        out.write_i32(site.zero_point);
    }
}

QuantizedModel load_quantized(const std::string& path) {
    BinaryReader in(path);
    in.expect_magic(kQuantMagic);
    in.expect_version(kQuantVersion);

    QuantizedModel q;
    q.config = read_config(in);
    const ModelParamsT<float> shapes = make_zero_params<float>(q.config);
    for (const auto& block : shapes.conv_blocks) {
        q.conv_weights.push_back(read_qtensor(in, block.weights.size()));
    }
    q.temporal_weights = read_qtensor(in, shapes.temporal.weights.size());
    for (const auto& layer : shapes.dense_layers) {
        q.dense_weights.push_back(read_qtensor(in, layer.weights.size()));
    }
    for (const auto& block : shapes.conv_blocks) {
        std::vector<float> b(block.biases.size());
        in.read_f32_array(b);
        q.conv_biases.push_back(std::move(b));
    }
    q.temporal_biases.resize(shapes.temporal.biases.size());
    in.read_f32_array(q.temporal_biases);
    for (const auto& layer : shapes.dense_layers) {
        std::vector<float> b(layer.biases.size());
        in.read_f32_array(b);
        q.dense_biases.push_back(std::move(b));
    }
    for (std::size_t i = 0; i < q.expected_sites(); ++i) {
        q.activation_sites.push_back(read_qparams(in));
    }
    if (!in.at_end()) {
        throw FormatError("'" + path + "': trailing bytes at byte " +
                          std::to_string(in.offset()));
    }
    return q;
}

} // namespace stn
