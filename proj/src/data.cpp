#include "stn/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stn/errors.hpp"
#include "stn/io.hpp"

namespace stn {

void DatasetSpec::validate() const {
    if (clips_per_class < 1) throw ConfigError("clips per class must be >= 1");
    if (frames_per_clip < 2) throw ConfigError("frames per clip must be >= 2");
    if (height < 8 || width < 8) throw ConfigError("frame dims must be >= 8x8");
    if (channels < 1) throw ConfigError("channels must be >= 1");
    if (classes < 2 || classes > 3) throw ConfigError("class count must be 2 or 3");
    if (noise_amplitude < 0.0f) throw ConfigError("noise amplitude must be >= 0");
}

double uniform_unit(std::mt19937& rng) {
    return (static_cast<double>(rng()) + 0.5) / 4294967296.0;
}

double uniform_range(std::mt19937& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(rng);
}

std::uint32_t clip_seed(std::uint32_t dataset_seed, int class_id, int clip_index) {
    // splitmix-style mixing of (seed, class, index)
    std::uint64_t z = (static_cast<std::uint64_t>(dataset_seed) << 32) ^
                      (static_cast<std::uint64_t>(class_id) << 20) ^
                      static_cast<std::uint64_t>(clip_index);
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    return static_cast<std::uint32_t>(z);
}

namespace {

struct SceneParams {
    double base, texture_amp, fx, fy, px, py;
    double blob_amp, sigma, x_center, y_start, y_end;
};

SceneParams draw_scene(std::mt19937& rng, const DatasetSpec& spec, bool with_blob) {
    SceneParams s{};
    s.base = uniform_range(rng, 60.0, 120.0);
    s.texture_amp = uniform_range(rng, 10.0, 30.0);
    s.fx = uniform_range(rng, 0.5, 2.0);
    s.fy = uniform_range(rng, 0.5, 2.0);
    s.px = uniform_unit(rng);
    s.py = uniform_unit(rng);
    if (with_blob) {
        s.blob_amp = uniform_range(rng, 90.0, 120.0);
        s.sigma = uniform_range(rng, 0.09, 0.15) * std::min(spec.height, spec.width);
        s.x_center = uniform_range(rng, 0.25, 0.75) * (spec.width - 1);
        const double margin = 0.15 * (spec.height - 1);
        s.y_start = (spec.height - 1) - margin;  // bottom
        s.y_end = margin;                        // top
    }
    return s;
}

// Upward-moving clip; the static clip is the same scene with no blob.
std::vector<std::uint8_t> render_clip(std::mt19937& rng, const DatasetSpec& spec,
                                      bool with_blob) {
    const SceneParams s = draw_scene(rng, spec, with_blob);
    const int f_count = spec.frames_per_clip;
    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(f_count) * spec.height *
                                     spec.width * spec.channels);
    constexpr double two_pi = 2.0 * std::numbers::pi;
    std::size_t at = 0;
    for (int f = 0; f < f_count; ++f) {
        const double progress = static_cast<double>(f) / (f_count - 1);
        const double y_center = s.y_start + (s.y_end - s.y_start) * progress;
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                double v = s.base +
                           s.texture_amp *
                               std::sin(two_pi * (s.fx * x / spec.width + s.px)) *
                               std::cos(two_pi * (s.fy * y / spec.height + s.py));
                if (with_blob) {
                    const double dx = x - s.x_center;
                    const double dy = y - y_center;
                    v += s.blob_amp *
                         std::exp(-(dx * dx + dy * dy) / (2.0 * s.sigma * s.sigma));
                }
                for (int c = 0; c < spec.channels; ++c) {
                    const double noisy =
                        v + uniform_range(rng, -spec.noise_amplitude, spec.noise_amplitude);
                    pixels[at++] =
                        static_cast<std::uint8_t>(std::clamp(noisy, 0.0, 255.0) + 0.5);
                }
            }
        }
    }
    return pixels;
}

void reverse_frames(std::vector<std::uint8_t>& pixels, std::size_t frame_bytes, int frames) {
    for (int f = 0; f < frames / 2; ++f) {
        std::swap_ranges(pixels.begin() + static_cast<std::ptrdiff_t>(f * frame_bytes),
                         pixels.begin() + static_cast<std::ptrdiff_t>((f + 1) * frame_bytes),
                         pixels.begin() +
                             static_cast<std::ptrdiff_t>((frames - 1 - f) * frame_bytes));
    }
}

} // namespace

std::vector<std::uint8_t> render_upward_clip(const DatasetSpec& spec, std::uint32_t seed) {
    spec.validate();
    std::mt19937 rng(seed);
    return render_clip(rng, spec, true);
}

Dataset generate_dataset(const DatasetSpec& spec) {
    spec.validate();
    Dataset dataset;
    dataset.frames_per_clip = spec.frames_per_clip;
    dataset.height = spec.height;
    dataset.width = spec.width;
    dataset.channels = spec.channels;
    dataset.classes = spec.classes;
    dataset.clips.reserve(static_cast<std::size_t>(spec.classes) * spec.clips_per_class);

    for (int class_id = 0; class_id < spec.classes; ++class_id) {
        for (int i = 0; i < spec.clips_per_class; ++i) {
            std::mt19937 rng(clip_seed(spec.seed, class_id, i));
            ClipRecord clip;
            clip.label = static_cast<std::uint8_t>(class_id);
            if (class_id == 0) {
                clip.pixels = render_clip(rng, spec, false);
            } else {
                clip.pixels = render_clip(rng, spec, true);
                if (class_id == 2) {
                    reverse_frames(clip.pixels, dataset.frame_bytes(), spec.frames_per_clip);
                }
            }
            dataset.clips.push_back(std::move(clip));
        }
    }
    return dataset;
}

std::vector<int> sample_uniform_indices(int frame_count, int window) {
    if (window < 1) throw InputError("window must be >= 1");
    if (frame_count < window) {
        throw InputError("clip has " + std::to_string(frame_count) + " frames, window needs " +
                         std::to_string(window));
    }
    if (window == 1) return {frame_count - 1};
    std::vector<int> indices(static_cast<std::size_t>(window));
    const long long span = frame_count - 1;
    const long long steps = window - 1;
    for (long long i = 0; i < window; ++i) {
        indices[static_cast<std::size_t>(i)] =
            static_cast<int>((2 * i * span + steps) / (2 * steps));  // round half up
    }
    return indices;
}

Tensor3 frame_tensor(const Dataset& dataset, const ClipRecord& clip, int frame_index) {
    if (frame_index < 0 || frame_index >= dataset.frames_per_clip) {
        throw InputError("frame index out of range");
    }
    Tensor3 frame(dataset.height, dataset.width, dataset.channels);
    const std::uint8_t* src = clip.pixels.data() + dataset.frame_bytes() * frame_index;
    for (std::size_t i = 0; i < frame.size(); ++i) {
        frame.data[i] = static_cast<float>(src[i]) / 255.0f;
    }
    return frame;
}

std::vector<Tensor3> trailing_window(const Dataset& dataset, const ClipRecord& clip,
                                     int event_index, int window) {
    if (event_index < 0 || event_index >= dataset.frames_per_clip) {
        throw InputError("event index out of range");
    }
    std::vector<Tensor3> frames;
    frames.reserve(static_cast<std::size_t>(window));
    for (int t = event_index - window + 1; t <= event_index; ++t) {
        frames.push_back(frame_tensor(dataset, clip, std::max(0, t)));
    }
    return frames;
}

std::vector<WindowSample> uniform_windows(const Dataset& dataset, int window) {
    const std::vector<int> indices = sample_uniform_indices(dataset.frames_per_clip, window);
    std::vector<WindowSample> samples;
    samples.reserve(dataset.clips.size());
    for (const ClipRecord& clip : dataset.clips) {
        WindowSample sample;
        sample.label = clip.label;
        sample.frames.reserve(indices.size());
        for (int idx : indices) sample.frames.push_back(frame_tensor(dataset, clip, idx));
        samples.push_back(std::move(sample));
    }
    return samples;
}

SplitIndices split_dataset(std::size_t clip_count, std::uint32_t seed) {
    std::vector<std::size_t> order(clip_count);
    for (std::size_t i = 0; i < clip_count; ++i) order[i] = i;
    std::mt19937 rng(seed ^ 0x5f3759dfu);
    deterministic_shuffle(order, rng);

    SplitIndices split;
    const std::size_t n_train = clip_count * 8 / 10;
    const std::size_t n_val = clip_count / 10;
    split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                     order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    return split;
}

namespace {
constexpr char kDatasetMagic[5] = "STND";
constexpr std::uint32_t kDatasetVersion = 1;
} // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
    BinaryWriter out(path);
    out.write_magic(kDatasetMagic);
    out.write_u32(kDatasetVersion);
    out.write_u32(static_cast<std::uint32_t>(dataset.clips.size()));
    out.write_u16(static_cast<std::uint16_t>(dataset.frames_per_clip));
    out.write_u16(static_cast<std::uint16_t>(dataset.height));
    out.write_u16(static_cast<std::uint16_t>(dataset.width));
    out.write_u8(static_cast<std::uint8_t>(dataset.channels));
    out.write_u8(static_cast<std::uint8_t>(dataset.classes));
    for (const ClipRecord& clip : dataset.clips) {
        out.write_u8(clip.label);
        out.write_bytes(clip.pixels.data(), clip.pixels.size());
    }
}

Dataset load_dataset(const std::string& path) {
    BinaryReader in(path);
    in.expect_magic(kDatasetMagic);
    in.expect_version(kDatasetVersion);

    Dataset dataset;
    const std::uint32_t clip_count = in.read_u32();
    dataset.frames_per_clip = in.read_u16();
    dataset.height = in.read_u16();
    dataset.width = in.read_u16();
    dataset.channels = in.read_u8();
    dataset.classes = in.read_u8();
    if (dataset.frames_per_clip < 1 || dataset.height < 1 || dataset.width < 1 ||
        dataset.channels < 1 || dataset.classes < 2) {
        throw FormatError("'" + path + "': implausible dataset header");
    }

    const std::size_t clip_bytes = dataset.frame_bytes() * dataset.frames_per_clip;
    dataset.clips.resize(clip_count);
    for (std::uint32_t i = 0; i < clip_count; ++i) {
        ClipRecord& clip = dataset.clips[i];
        const std::size_t at = in.offset();
        clip.label = in.read_u8();
        if (clip.label >= dataset.classes) {
            throw FormatError("'" + path + "': clip " + std::to_string(i) + " label " +
                              std::to_string(clip.label) + " out of range at byte " +
                              std::to_string(at));
        }
        clip.pixels.resize(clip_bytes);
        in.read_bytes(clip.pixels.data(), clip_bytes);
    }
    if (!in.at_end()) {
        throw FormatError("'" + path + "': trailing bytes after clip data at byte " +
                          std::to_string(in.offset()));
    }
    return dataset;
}

} // namespace stn
