#include "stn/baseline.hpp"

#include <algorithm>
#include <map>

namespace stn {

ModelConfig frame_model_config(const ModelConfig& config) {
    ModelConfig fc = config;
    fc.window = 1;
    return fc;
}

FrameModel build_frame_model(const ModelConfig& config, std::uint32_t seed) {
    return FrameModel{build_model(frame_model_config(config), seed)};
}

Classification predict_frame(const FrameModel& fm, const Tensor3& frame) {
    const Tensor3 frames[1] = {frame};
    return classify_window(fm.model, std::span<const Tensor3>(frames, 1));
}

int majority_vote(std::span<const int> labels) {
    if (labels.empty()) throw InputError("majority_vote: no labels");
    std::map<int, int> counts;
    for (int label : labels) ++counts[label];
    int best_label = labels[0];
    int best_count = 0;
    for (const auto& [label, count] : counts) {  // ascending labels: ties keep the lowest
        if (count > best_count) {
            best_count = count;
            best_label = label;
        }
    }
    return best_label;
}

double evaluate_baseline(const FrameModel& fm, std::span<const WindowSample> samples) {
    if (samples.empty()) throw InputError("evaluate_baseline: empty dataset");
    std::size_t correct = 0;
    std::vector<int> votes;
    for (const WindowSample& sample : samples) {
        votes.clear();
        for (const Tensor3& frame : sample.frames) {
            votes.push_back(predict_frame(fm, frame).label);
        }
        if (majority_vote(votes) == sample.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

std::vector<WindowSample> frames_of_windows(std::span<const WindowSample> samples) {
    std::vector<WindowSample> frames;
    frames.reserve(samples.size());
    for (const WindowSample& sample : samples) {
        for (const Tensor3& frame : sample.frames) {
            WindowSample single;
            single.label = sample.label;
            single.frames.push_back(frame);
            frames.push_back(std::move(single));
        }
    }
    return frames;
}

} // namespace stn
