#ifndef STN_QUANT_HPP
#define STN_QUANT_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stn/data.hpp"
#include "stn/model.hpp"

namespace stn {

struct QuantParams {
    float scale = 1.0f;
    int zero_point = 0;
};

// q = clamp(round(v / scale) + zero_point, qmin, qmax), rounding half away
// from zero. Signed range is [-127, 127] (symmetric), unsigned [0, 255].
int quantize_value(float v, const QuantParams& params, bool signed_range);
float dequantize_value(int q, const QuantParams& params);

std::vector<std::int8_t> quantize_signed(std::span<const float> values,
                                         const QuantParams& params);
std::vector<std::uint8_t> quantize_unsigned(std::span<const float> values,
                                            const QuantParams& params);

// Symmetric per-tensor weight parameters: scale = max|v| / 127, zero point 0.
QuantParams symmetric_params(std::span<const float> values);

// Asymmetric parameters for an observed [lo, hi] range. The range is widened
// to include zero and a degenerate range is padded by epsilon so the scale
// stays positive.
QuantParams asymmetric_params(float lo, float hi);

struct QuantizedTensor {
    QuantParams params;
    std::vector<std::int8_t> values;
};

// Int8 mirror of a float model: symmetric signed per-tensor weights,
// asymmetric unsigned activations calibrated per site, float biases.
// Activation sites in order: model input, each conv block output
// (post-relu), the temporal conv output, each hidden dense output.
struct QuantizedModel {
    ModelConfig config;
    std::vector<QuantizedTensor> conv_weights;
    QuantizedTensor temporal_weights;
    std::vector<QuantizedTensor> dense_weights;
    std::vector<std::vector<float>> conv_biases;
    std::vector<float> temporal_biases;
    std::vector<std::vector<float>> dense_biases;
    std::vector<QuantParams> activation_sites;

    std::size_t expected_sites() const {
        return static_cast<std::size_t>(config.conv_blocks()) +
               static_cast<std::size_t>(config.hidden_dense_layers()) + 2;
    }
};

// Post-training quantization: weight scales from per-tensor max magnitude,
// activation ranges from min/max over forward passes on the calibration
// windows. Deterministic for fixed inputs.
QuantizedModel calibrate(const Model& model, std::span<const WindowSample> calibration_windows);

// Integer conv/dense/temporal kernels with 32-bit accumulators and
// requantization between layers; softmax runs on dequantized real logits.
Classification classify_window_quantized(const QuantizedModel& qmodel,
                                         std::span<const Tensor3> frames);

// Quantized weight file ("STNQ", version 1, little-endian).
void save_quantized(const QuantizedModel& qmodel, const std::string& path);
QuantizedModel load_quantized(const std::string& path);

} // namespace stn

#endif
