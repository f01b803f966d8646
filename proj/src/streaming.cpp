#include "stn/streaming.hpp"

#include <algorithm>
#include <string>

namespace stn {

StreamEngine::StreamEngine(const Model& model, int stride)
    : model_(&model), stride_(stride), accumulator_mode_(stride == model.config.window) {
    if (stride < 1 || stride > model.config.window) {
        throw ConfigError("stream stride " + std::to_string(stride) + " out of range [1, " +
                          std::to_string(model.config.window) + "]");
    }
    if (!accumulator_mode_) {
        ring_.resize(static_cast<std::size_t>(model.config.window));
    }
}

void StreamEngine::reset() {
    frames_pushed_ = 0;
    feature_extractions_ = 0;
    peak_feature_maps_ = 0;
    ring_count_ = 0;
    window_position_ = 0;
    accumulator_ = Tensor3();
}

Prediction StreamEngine::finish_prediction(const Tensor3& combined) {
    Prediction p;
    p.frame_index = frames_pushed_ - 1;
    std::vector<float> logits = head_logits_t(model_->params, combined);
    p.probabilities = softmax(std::span<const float>(logits));
    p.label = static_cast<int>(argmax_lowest(std::span<const float>(p.probabilities)));
    return p;
}

std::optional<Prediction> StreamEngine::push_frame(const Tensor3& frame) {
    const ModelConfig& cfg = model_->config;
    Tensor3 feature = extract_features(*model_, frame);
    ++feature_extractions_;
    ++frames_pushed_;

    if (accumulator_mode_) {
        const TemporalConvParams& tp = model_->params.temporal;
        const int ch = tp.channels;
        if (window_position_ == 0) {
            // Seed with the biases so the sum matches temporal_combine exactly.
            accumulator_ = Tensor3(feature.height, feature.width, feature.channels);
            for (std::size_t i = 0; i < accumulator_.size(); ++i) {
                accumulator_.data[i] = tp.biases[i % ch];
            }
        }
        const int t = window_position_;
        for (std::size_t i = 0; i < feature.size(); ++i) {
            accumulator_.data[i] +=
                tp.weights[tp.weight_index(static_cast<int>(i % ch), t)] * feature.data[i];
        }
        peak_feature_maps_ = std::max<std::size_t>(peak_feature_maps_, 1);
        if (++window_position_ < cfg.window) {
            return std::nullopt;
        }
        window_position_ = 0;
        Prediction p = finish_prediction(accumulator_);
        accumulator_ = Tensor3();
        return p;
    }

    ring_[static_cast<std::size_t>((frames_pushed_ - 1) % cfg.window)] = std::move(feature);
    ring_count_ = std::min<std::size_t>(ring_count_ + 1, static_cast<std::size_t>(cfg.window));
    peak_feature_maps_ = std::max(peak_feature_maps_, ring_count_);

    if (frames_pushed_ < static_cast<std::uint64_t>(cfg.window) ||
        (frames_pushed_ - cfg.window) % static_cast<std::uint64_t>(stride_) != 0) {
        return std::nullopt;
    }

    FeatureWindow window;
    window.reserve(static_cast<std::size_t>(cfg.window));
    for (int t = 0; t < cfg.window; ++t) {
        window.push_back(
            ring_[static_cast<std::size_t>((frames_pushed_ - cfg.window + t) % cfg.window)]);
    }
    Tensor3 combined = temporal_combine(model_->params.temporal, window);
    return finish_prediction(combined);
}

} // namespace stn
