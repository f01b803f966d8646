#ifndef STN_BACKPROP_HPP
#define STN_BACKPROP_HPP

#include <cmath>
#include <span>
#include <vector>

#include "stn/model.hpp"

namespace stn {

// Every parameter vector of a model in serialization order (weights then
// biases per layer). Shared by the optimizer, the gradient checker, and
// parameter-count audits.
template <class R>
std::vector<std::vector<R>*> param_vectors(ModelParamsT<R>& params) {
    std::vector<std::vector<R>*> out;
    for (auto& block : params.conv_blocks) {
        out.push_back(&block.weights);
        out.push_back(&block.biases);
    }
    out.push_back(&params.temporal.weights);
    out.push_back(&params.temporal.biases);
    for (auto& layer : params.dense_layers) {
        out.push_back(&layer.weights);
        out.push_back(&layer.biases);
    }
    return out;
}

template <class R>
std::size_t parameter_count(const ModelParamsT<R>& params) {
    std::size_t n = 0;
    for (const auto* v : param_vectors(const_cast<ModelParamsT<R>&>(params))) n += v->size();
    return n;
}

// dst += scale * src, elementwise over all parameters.
template <class R>
void accumulate_params(ModelParamsT<R>& dst, const ModelParamsT<R>& src, R scale) {
    auto d = param_vectors(dst);
    auto s = param_vectors(const_cast<ModelParamsT<R>&>(src));
    for (std::size_t v = 0; v < d.size(); ++v) {
        for (std::size_t i = 0; i < d[v]->size(); ++i) {
            (*d[v])[i] += scale * (*s[v])[i];
        }
    }
}

template <class R>
void zero_params(ModelParamsT<R>& params) {
    for (auto* v : param_vectors(params)) {
        std::fill(v->begin(), v->end(), R(0));
    }
}

// ---------------------------------------------------------------------------
// Forward pass with cached intermediates, and the matching backward pass.
// ---------------------------------------------------------------------------

template <class R>
struct BlockCacheT {
    Tensor3T<R> conv_pre;                 // conv output, before relu
    Tensor3T<R> relu_out;                 // pooling input
    std::vector<std::uint32_t> pool_argmax;
    Tensor3T<R> pool_out;
};

template <class R>
struct ForwardCacheT {
    std::vector<std::vector<BlockCacheT<R>>> blocks;  // [frame][block]
    std::vector<Tensor3T<R>> features;                // g output per frame
    Tensor3T<R> combined;                             // temporal conv output
    std::vector<std::vector<R>> dense_pre;            // hidden layers, pre-relu
    std::vector<std::vector<R>> dense_act;            // hidden layers, post-relu
    std::vector<R> logits;
    std::vector<R> probabilities;
};

template <class R>
std::vector<R> forward_window_cached(const ModelConfig& config, const ModelParamsT<R>& params,
                                     std::span<const Tensor3T<R>> frames,
                                     ForwardCacheT<R>& cache) {
    if (frames.size() != static_cast<std::size_t>(config.window)) {
        throw InputError("forward: frame count does not match window");
    }
    cache.blocks.assign(frames.size(), {});
    cache.features.clear();
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const Tensor3T<R>* x = &frames[t];
        if (x->height != config.input_height || x->width != config.input_width ||
            x->channels != config.input_channels) {
            throw InputError("forward: frame dims do not match model input dims");
        }
        auto& frame_cache = cache.blocks[t];
        frame_cache.resize(params.conv_blocks.size());
        for (std::size_t i = 0; i < params.conv_blocks.size(); ++i) {
            BlockCacheT<R>& bc = frame_cache[i];
            bc.conv_pre = conv2d(*x, params.conv_blocks[i]);
            bc.relu_out = relu(bc.conv_pre);
            auto pooled = maxpool2x2(bc.relu_out);
            bc.pool_out = std::move(pooled.output);
            bc.pool_argmax = std::move(pooled.argmax);
            x = &bc.pool_out;
        }
        cache.features.push_back(frame_cache.back().pool_out);
    }
    cache.combined =
        temporal_combine_t(params.temporal, std::span<const Tensor3T<R>>(cache.features));

    cache.dense_pre.clear();
    cache.dense_act.clear();
    std::vector<R> v = cache.combined.data;
    const std::size_t hidden = params.dense_layers.size() - 1;
    for (std::size_t j = 0; j < hidden; ++j) {
        cache.dense_pre.push_back(dense(std::span<const R>(v), params.dense_layers[j]));
        cache.dense_act.push_back(relu(cache.dense_pre.back()));
        v = cache.dense_act.back();
    }
    cache.logits = dense(std::span<const R>(v), params.dense_layers[hidden]);
    cache.probabilities = softmax(std::span<const R>(cache.logits));
    return cache.probabilities;
}

// Accumulates dLoss/dparams into `grads` (shapes must match `params`),
// starting from the gradient at the logits.
template <class R>
void backward_window(const ModelParamsT<R>& params, std::span<const Tensor3T<R>> frames,
                     const ForwardCacheT<R>& cache, std::span<const R> logit_grad,
                     ModelParamsT<R>& grads) {
    const std::size_t hidden = params.dense_layers.size() - 1;

    // Dense head.
    std::vector<R> delta(logit_grad.begin(), logit_grad.end());
    for (std::size_t j = hidden + 1; j-- > 0;) {
        const std::vector<R>& layer_input =
            j == 0 ? cache.combined.data : cache.dense_act[j - 1];
        auto dg = dense_backward(std::span<const R>(layer_input), params.dense_layers[j],
                                 std::span<const R>(delta));
        auto& gw = grads.dense_layers[j].weights;
        auto& gb = grads.dense_layers[j].biases;
        for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += dg.weights[i];
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += dg.biases[i];
        delta = std::move(dg.input);
        if (j > 0) {
            delta = relu_backward(std::span<const R>(cache.dense_pre[j - 1]),
                                  std::span<const R>(delta));
        }
    }

    // Temporal conv: out[m,n,c] = b[c] + sum_t w[c,t] * O_t[m,n,c].
    Tensor3T<R> combined_grad(cache.combined.height, cache.combined.width,
                              cache.combined.channels);
    combined_grad.data = delta;
    const int ch = params.temporal.channels;
    std::vector<Tensor3T<R>> feature_grads;
    feature_grads.reserve(frames.size());
    for (int t = 0; t < params.temporal.window; ++t) {
        const Tensor3T<R>& feature = cache.features[t];
        Tensor3T<R> fg(feature.height, feature.width, feature.channels);
        for (std::size_t i = 0; i < feature.size(); ++i) {
            const int c = static_cast<int>(i % ch);
            const R d = combined_grad.data[i];
            grads.temporal.weights[grads.temporal.weight_index(c, t)] += d * feature.data[i];
            fg.data[i] = params.temporal.weights[params.temporal.weight_index(c, t)] * d;
        }
        feature_grads.push_back(std::move(fg));
    }
    for (std::size_t i = 0; i < combined_grad.size(); ++i) {
        grads.temporal.biases[i % ch] += combined_grad.data[i];
    }

    // Spatial extractor, shared across the window: gradients sum over frames.
    for (std::size_t t = 0; t < frames.size(); ++t) {
        Tensor3T<R> d = std::move(feature_grads[t]);
        for (std::size_t i = params.conv_blocks.size(); i-- > 0;) {
            const BlockCacheT<R>& bc = cache.blocks[t][i];
            d = maxpool2x2_backward(bc.pool_argmax, d, bc.relu_out.height, bc.relu_out.width);
            d = relu_backward(bc.conv_pre, d);
            const Tensor3T<R>& block_input =
                i == 0 ? frames[t] : cache.blocks[t][i - 1].pool_out;
            auto cg = conv2d_backward(block_input, params.conv_blocks[i], d);
            auto& gw = grads.conv_blocks[i].weights;
            auto& gb = grads.conv_blocks[i].biases;
            for (std::size_t j = 0; j < gw.size(); ++j) gw[j] += cg.weights[j];
            for (std::size_t j = 0; j < gb.size(); ++j) gb[j] += cg.biases[j];
            d = std::move(cg.input);
        }
    }
}

} // namespace stn

#endif
