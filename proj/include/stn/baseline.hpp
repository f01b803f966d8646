#ifndef STN_BASELINE_HPP
#define STN_BASELINE_HPP

#include <span>
#include <vector>

#include "stn/data.hpp"
#include "stn/model.hpp"

namespace stn {

// Frame-by-frame comparison model: the same conv stack and dense head with a
// window of one, so the temporal stage degenerates to a per-channel gain.
struct FrameModel {
    Model model;
};

// Same architecture as `config` with T forced to 1.
ModelConfig frame_model_config(const ModelConfig& config);

FrameModel build_frame_model(const ModelConfig& config, std::uint32_t seed);

Classification predict_frame(const FrameModel& fm, const Tensor3& frame);

// Most frequent label; ties resolve to the lowest class index.
int majority_vote(std::span<const int> labels);

// Window prediction = majority vote over the per-frame predictions.
double evaluate_baseline(const FrameModel& fm, std::span<const WindowSample> samples);

// Explodes T-frame windows into single-frame samples inheriting the window
// label; the baseline trains on exactly the frames the windowed model sees.
std::vector<WindowSample> frames_of_windows(std::span<const WindowSample> samples);

} // namespace stn

#endif
