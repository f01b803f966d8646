#ifndef STN_DATA_HPP
#define STN_DATA_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stn/tensor.hpp"

namespace stn {

// Synthetic streaming-video task with temporally defined classes:
//   0  static textured background
//   1  bright blob translating upward
//   2  frame-reversal of an independently drawn upward clip
// Classes 1 and 2 share the same per-frame distribution by construction, so
// only a multi-frame classifier can separate them.
struct DatasetSpec {
    int clips_per_class = 600;
    int frames_per_clip = 24;
    int height = 32;
    int width = 32;
    int channels = 1;
    int classes = 3;  // 2 drops the reversed class
    float noise_amplitude = 8.0f;
    std::uint32_t seed = 7;

    void validate() const;
};

struct ClipRecord {
    std::uint8_t label = 0;
    std::vector<std::uint8_t> pixels;  // frames_per_clip * height * width * channels
};

struct Dataset {
    int frames_per_clip = 0;
    int height = 0;
    int width = 0;
    int channels = 0;
    int classes = 0;
    std::vector<ClipRecord> clips;

    std::size_t frame_bytes() const {
        return static_cast<std::size_t>(height) * width * channels;
    }
};

Dataset generate_dataset(const DatasetSpec& spec);

// Seed of the rng driving one clip; exposed so tests can re-derive clips.
std::uint32_t clip_seed(std::uint32_t dataset_seed, int class_id, int clip_index);

// Building block of the generator: one upward-motion clip driven by `seed`.
// A class 2 clip is exactly such a clip with its frames reversed.
std::vector<std::uint8_t> render_upward_clip(const DatasetSpec& spec, std::uint32_t seed);

// Uniformly spaced frame indices covering [0, frame_count): first index 0,
// last frame_count-1, interior points rounded half-up. window == 1 picks the
// final frame.
std::vector<int> sample_uniform_indices(int frame_count, int window);

// Frame as a float tensor scaled to [0, 1].
Tensor3 frame_tensor(const Dataset& dataset, const ClipRecord& clip, int frame_index);

// The `window` frames ending at event_index, repeating the first frame for
// positions before the clip start.
std::vector<Tensor3> trailing_window(const Dataset& dataset, const ClipRecord& clip,
                                     int event_index, int window);

struct WindowSample {
    std::vector<Tensor3> frames;
    int label = 0;
};

// One uniformly sampled window per clip.
std::vector<WindowSample> uniform_windows(const Dataset& dataset, int window);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

// Deterministic shuffled 8:1:1 split.
SplitIndices split_dataset(std::size_t clip_count, std::uint32_t seed);

// Platform-independent uniform helpers over std::mt19937.
double uniform_unit(std::mt19937& rng);
double uniform_range(std::mt19937& rng, double lo, double hi);

template <class T>
void deterministic_shuffle(std::vector<T>& values, std::mt19937& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng()) % i;
        std::swap(values[i - 1], values[j]);
    }
}

// Dataset file ("STND", version 1, little-endian).
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

} // namespace stn

#endif
