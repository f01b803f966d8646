#ifndef STN_STREAMING_HPP
#define STN_STREAMING_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "stn/model.hpp"

namespace stn {

struct Prediction {
    std::uint64_t frame_index = 0;  // 0-based index of the newest frame in the window
    int label = 0;
    std::vector<float> probabilities;
};

// Stateful engine over an unbounded frame stream. Each pushed frame runs the
// spatial extractor exactly once; its feature map is either kept in a T-deep
// ring buffer (sliding mode) or folded straight into a running temporal
// accumulator (stride == T), which never stores more than one map.
class StreamEngine {
public:
    StreamEngine(const Model& model, int stride);

    // Returns a prediction once T frames have arrived and the stride phase
    // matches; otherwise nothing (warm-up or skipped offset).
    std::optional<Prediction> push_frame(const Tensor3& frame);

    void reset();

    std::uint64_t frames_pushed() const { return frames_pushed_; }

    // How many times the spatial extractor ran since construction/reset.
    std::uint64_t feature_extractions() const { return feature_extractions_; }

    // High-water mark of feature maps retained between pushes.
    std::size_t peak_feature_maps() const { return peak_feature_maps_; }

    bool accumulator_mode() const { return accumulator_mode_; }
    int stride() const { return stride_; }

private:
    Prediction finish_prediction(const Tensor3& combined);

    const Model* model_;
    int stride_;
    bool accumulator_mode_;
    std::uint64_t frames_pushed_ = 0;
    std::uint64_t feature_extractions_ = 0;
    std::size_t peak_feature_maps_ = 0;

    std::vector<Tensor3> ring_;   // sliding mode, capacity T
    std::size_t ring_count_ = 0;

    Tensor3 accumulator_;         // accumulator mode
    int window_position_ = 0;
};

} // namespace stn

#endif
