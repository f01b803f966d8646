#ifndef STN_KERNELS_HPP
#define STN_KERNELS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stn/errors.hpp"
#include "stn/tensor.hpp"

namespace stn {

// ---------------------------------------------------------------------------
// Operation counting.
//
// When a scope is active, every kernel reports its cost derived from the
// tensor shapes it actually ran with: one count per multiply-accumulate for
// conv/dense/temporal kernels, 2x2 counts per input element for max pooling.
// Activations and the softmax normalization are free.
// ---------------------------------------------------------------------------

namespace detail {
inline thread_local std::uint64_t* g_op_counter = nullptr;
}

class OpCountScope {
public:
    OpCountScope() : prev_(detail::g_op_counter) { detail::g_op_counter = &count_; }
    ~OpCountScope() { detail::g_op_counter = prev_; }
    OpCountScope(const OpCountScope&) = delete;
    OpCountScope& operator=(const OpCountScope&) = delete;

    std::uint64_t count() const { return count_; }

private:
    std::uint64_t count_ = 0;
    std::uint64_t* prev_;
};

inline void count_ops(std::uint64_t n) {
    if (detail::g_op_counter) *detail::g_op_counter += n;
}

// ---------------------------------------------------------------------------
// Layer parameters.
// ---------------------------------------------------------------------------

// Square r x r convolution, weights in (ky, kx, in_channel, out_channel)
// row-major order.
template <class R>
struct ConvLayerParamsT {
    int kernel_size = 0;
    int in_channels = 0;
    int out_channels = 0;
    std::vector<R> weights;
    std::vector<R> biases;

    static ConvLayerParamsT zeros(int r, int in_c, int out_c) {
        if (r < 1 || in_c < 1 || out_c < 1) {
            throw ConfigError("conv layer dims must be >= 1");
        }
        ConvLayerParamsT p;
        p.kernel_size = r;
        p.in_channels = in_c;
        p.out_channels = out_c;
        p.weights.assign(static_cast<std::size_t>(r) * r * in_c * out_c, R(0));
        p.biases.assign(static_cast<std::size_t>(out_c), R(0));
        return p;
    }

    std::size_t weight_index(int ky, int kx, int in_c, int out_c) const {
        return ((static_cast<std::size_t>(ky) * kernel_size + kx) * in_channels + in_c) *
                   out_channels +
               out_c;
    }

    void validate() const {
        const std::size_t expect =
            static_cast<std::size_t>(kernel_size) * kernel_size * in_channels * out_channels;
        if (weights.size() != expect || biases.size() != static_cast<std::size_t>(out_channels)) {
            throw ConfigError("conv layer parameter count mismatch");
        }
    }
};

// Fully connected layer, weights in (in_feature, out_feature) row-major order.
template <class R>
struct DenseLayerParamsT {
    int in_features = 0;
    int out_features = 0;
    std::vector<R> weights;
    std::vector<R> biases;

    static DenseLayerParamsT zeros(int in_f, int out_f) {
        if (in_f < 1 || out_f < 1) {
            throw ConfigError("dense layer dims must be >= 1");
        }
        DenseLayerParamsT p;
        p.in_features = in_f;
        p.out_features = out_f;
        p.weights.assign(static_cast<std::size_t>(in_f) * out_f, R(0));
        p.biases.assign(static_cast<std::size_t>(out_f), R(0));
        return p;
    }

    std::size_t weight_index(int in_f, int out_f) const {
        return static_cast<std::size_t>(in_f) * out_features + out_f;
    }

    void validate() const {
        if (weights.size() != static_cast<std::size_t>(in_features) * out_features ||
            biases.size() != static_cast<std::size_t>(out_features)) {
            throw ConfigError("dense layer parameter count mismatch");
        }
    }
};

using ConvLayerParams = ConvLayerParamsT<float>;
using DenseLayerParams = DenseLayerParamsT<float>;

template <class R>
struct ConvGradientsT {
    std::vector<R> weights;
    std::vector<R> biases;
    Tensor3T<R> input;
};

template <class R>
struct DenseGradientsT {
    std::vector<R> weights;
    std::vector<R> biases;
    std::vector<R> input;
};

// ---------------------------------------------------------------------------
// 2D convolution, stride 1, same padding. For an even kernel the extra
// padding row/column falls on the bottom/right.
// ---------------------------------------------------------------------------

template <class R>
Tensor3T<R> conv2d(const Tensor3T<R>& input, const ConvLayerParamsT<R>& params) {
    if (input.channels != params.in_channels) {
        throw ConfigError("conv2d: input has " + std::to_string(input.channels) +
                          " channels, layer expects " + std::to_string(params.in_channels));
    }
    const int m_dim = input.height;
    const int n_dim = input.width;
    const int r = params.kernel_size;
    const int c_in = params.in_channels;
    const int c_out = params.out_channels;
    const int pad = (r - 1) / 2;

    Tensor3T<R> out(m_dim, n_dim, c_out);
    for (int m = 0; m < m_dim; ++m) {
        for (int n = 0; n < n_dim; ++n) {
            R* out_row = &out.data[out.index(m, n, 0)];
            for (int o = 0; o < c_out; ++o) out_row[o] = params.biases[o];
        }
    }
    for (int m = 0; m < m_dim; ++m) {
        for (int ky = 0; ky < r; ++ky) {
            const int sm = m + ky - pad;
            if (sm < 0 || sm >= m_dim) continue;
            for (int n = 0; n < n_dim; ++n) {
                R* out_row = &out.data[out.index(m, n, 0)];
                for (int kx = 0; kx < r; ++kx) {
                    const int sn = n + kx - pad;
                    if (sn < 0 || sn >= n_dim) continue;
                    const R* in_row = &input.data[input.index(sm, sn, 0)];
                    const R* w_row = &params.weights[params.weight_index(ky, kx, 0, 0)];
                    for (int c = 0; c < c_in; ++c) {
                        const R x = in_row[c];
                        const R* w = w_row + static_cast<std::size_t>(c) * c_out;
                        for (int o = 0; o < c_out; ++o) out_row[o] += w[o] * x;
                    }
                }
            }
        }
    }
    // Padded taps count too: the cost model charges the full kernel support.
    count_ops(static_cast<std::uint64_t>(r) * r * c_in * c_out * m_dim * n_dim);
    return out;
}

template <class R>
ConvGradientsT<R> conv2d_backward(const Tensor3T<R>& input, const ConvLayerParamsT<R>& params,
                                  const Tensor3T<R>& upstream) {
    if (input.channels != params.in_channels) {
        throw ConfigError("conv2d_backward: input channel mismatch");
    }
    if (upstream.height != input.height || upstream.width != input.width ||
        upstream.channels != params.out_channels) {
        throw ConfigError("conv2d_backward: upstream shape does not match conv output");
    }
    const int m_dim = input.height;
    const int n_dim = input.width;
    const int r = params.kernel_size;
    const int c_in = params.in_channels;
    const int c_out = params.out_channels;
    const int pad = (r - 1) / 2;

    ConvGradientsT<R> grads;
    grads.weights.assign(params.weights.size(), R(0));
    grads.biases.assign(params.biases.size(), R(0));
    grads.input = Tensor3T<R>(m_dim, n_dim, c_in);

    for (int m = 0; m < m_dim; ++m) {
        for (int n = 0; n < n_dim; ++n) {
            const R* up_row = &upstream.data[upstream.index(m, n, 0)];
            for (int o = 0; o < c_out; ++o) grads.biases[o] += up_row[o];
            for (int ky = 0; ky < r; ++ky) {
                const int sm = m + ky - pad;
                if (sm < 0 || sm >= m_dim) continue;
                for (int kx = 0; kx < r; ++kx) {
                    const int sn = n + kx - pad;
                    if (sn < 0 || sn >= n_dim) continue;
                    const R* in_row = &input.data[input.index(sm, sn, 0)];
                    R* gin_row = &grads.input.data[grads.input.index(sm, sn, 0)];
                    for (int c = 0; c < c_in; ++c) {
                        const R x = in_row[c];
                        const std::size_t w_base = params.weight_index(ky, kx, c, 0);
                        const R* w = &params.weights[w_base];
                        R* gw = &grads.weights[w_base];
                        R acc = R(0);
                        for (int o = 0; o < c_out; ++o) {
                            gw[o] += up_row[o] * x;
                            acc += w[o] * up_row[o];
                        }
                        gin_row[c] += acc;
                    }
                }
            }
        }
    }
    return grads;
}

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2. A trailing odd row/column is dropped. The
// argmax map stores the flat input index of each window winner (ties go to
// the first element in row-major window scan order).
// ---------------------------------------------------------------------------

template <class R>
struct PoolResultT {
    Tensor3T<R> output;
    std::vector<std::uint32_t> argmax;
};

using PoolResult = PoolResultT<float>;

template <class R>
PoolResultT<R> maxpool2x2(const Tensor3T<R>& input) {
    if (input.height < 2 || input.width < 2) {
        throw ConfigError("maxpool2x2: input must be at least 2x2, got " +
                          std::to_string(input.height) + "x" + std::to_string(input.width));
    }
    const int out_h = input.height / 2;
    const int out_w = input.width / 2;
    const int ch = input.channels;

    PoolResultT<R> result;
    result.output = Tensor3T<R>(out_h, out_w, ch);
    result.argmax.resize(result.output.size());

    for (int m = 0; m < out_h; ++m) {
        for (int n = 0; n < out_w; ++n) {
            for (int c = 0; c < ch; ++c) {
                std::size_t best_idx = input.index(2 * m, 2 * n, c);
                R best = input.data[best_idx];
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = input.index(2 * m + dy, 2 * n + dx, c);
                        if (input.data[idx] > best) {
                            best = input.data[idx];
                            best_idx = idx;
                        }
                    }
                }
                const std::size_t out_idx = result.output.index(m, n, c);
                result.output.data[out_idx] = best;
                result.argmax[out_idx] = static_cast<std::uint32_t>(best_idx);
            }
        }
    }
    count_ops(4ull * input.height * input.width * ch);
    return result;
}

template <class R>
Tensor3T<R> maxpool2x2_backward(const std::vector<std::uint32_t>& argmax,
                                const Tensor3T<R>& upstream, int input_height,
                                int input_width) {
    if (argmax.size() != upstream.size()) {
        throw ConfigError("maxpool2x2_backward: argmax/upstream size mismatch");
    }
    if (upstream.height != input_height / 2 || upstream.width != input_width / 2) {
        throw ConfigError("maxpool2x2_backward: upstream shape inconsistent with input dims");
    }
    Tensor3T<R> grad(input_height, input_width, upstream.channels);
    for (std::size_t k = 0; k < argmax.size(); ++k) {
        if (argmax[k] >= grad.size()) {
            throw ConfigError("maxpool2x2_backward: argmax index out of range");
        }
        grad.data[argmax[k]] += upstream.data[k];
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Fully connected layer.
// ---------------------------------------------------------------------------

template <class R>
std::vector<R> dense(std::span<const R> input, const DenseLayerParamsT<R>& params) {
    if (input.size() != static_cast<std::size_t>(params.in_features)) {
        throw ConfigError("dense: input length " + std::to_string(input.size()) +
                          " != in_features " + std::to_string(params.in_features));
    }
    std::vector<R> out(params.biases.begin(), params.biases.end());
    for (int i = 0; i < params.in_features; ++i) {
        const R x = input[i];
        const R* w = &params.weights[params.weight_index(i, 0)];
        for (int j = 0; j < params.out_features; ++j) out[j] += w[j] * x;
    }
    count_ops(static_cast<std::uint64_t>(params.in_features) * params.out_features);
    return out;
}

template <class R>
DenseGradientsT<R> dense_backward(std::span<const R> input, const DenseLayerParamsT<R>& params,
                                  std::span<const R> upstream) {
    if (input.size() != static_cast<std::size_t>(params.in_features)) {
        throw ConfigError("dense_backward: input length mismatch");
    }
    if (upstream.size() != static_cast<std::size_t>(params.out_features)) {
        throw ConfigError("dense_backward: upstream length mismatch");
    }
    DenseGradientsT<R> grads;
    grads.weights.assign(params.weights.size(), R(0));
    grads.biases.assign(upstream.begin(), upstream.end());
    grads.input.assign(input.size(), R(0));
    for (int i = 0; i < params.in_features; ++i) {
        const R x = input[i];
        const R* w = &params.weights[params.weight_index(i, 0)];
        R* gw = &grads.weights[params.weight_index(i, 0)];
        R acc = R(0);
        for (int j = 0; j < params.out_features; ++j) {
            gw[j] += upstream[j] * x;
            acc += w[j] * upstream[j];
        }
        grads.input[i] = acc;
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Activations. relu_backward passes the upstream gradient where the forward
// input was strictly positive (0 at exactly 0).
// ---------------------------------------------------------------------------

template <class R>
void relu_inplace(std::span<R> values) {
    for (R& v : values) v = std::max(R(0), v);
}

template <class R>
std::vector<R> relu(const std::vector<R>& input) {
    std::vector<R> out(input);
    relu_inplace(std::span<R>(out));
    return out;
}

template <class R>
Tensor3T<R> relu(const Tensor3T<R>& input) {
    Tensor3T<R> out = input;
    relu_inplace(std::span<R>(out.data));
    return out;
}

template <class R>
std::vector<R> relu_backward(std::span<const R> input, std::span<const R> upstream) {
    if (input.size() != upstream.size()) {
        throw ConfigError("relu_backward: size mismatch");
    }
    std::vector<R> grad(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) {
        grad[i] = input[i] > R(0) ? upstream[i] : R(0);
    }
    return grad;
}

template <class R>
Tensor3T<R> relu_backward(const Tensor3T<R>& input, const Tensor3T<R>& upstream) {
    if (!input.same_shape(upstream)) {
        throw ConfigError("relu_backward: shape mismatch");
    }
    Tensor3T<R> grad(input.height, input.width, input.channels);
    for (std::size_t i = 0; i < input.size(); ++i) {
        grad.data[i] = input.data[i] > R(0) ? upstream.data[i] : R(0);
    }
    return grad;
}

// Max-subtracted softmax; safe for large logits.
template <class R>
std::vector<R> softmax(std::span<const R> logits) {
    const R peak = *std::max_element(logits.begin(), logits.end());
    std::vector<R> out(logits.size());
    R sum = R(0);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - peak);
        sum += out[i];
    }
    for (R& v : out) v /= sum;
    return out;
}

template <class R>
std::size_t argmax_lowest(std::span<const R> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

} // namespace stn

#endif
