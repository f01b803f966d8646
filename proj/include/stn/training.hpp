#ifndef STN_TRAINING_HPP
#define STN_TRAINING_HPP

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stn/data.hpp"
#include "stn/model.hpp"

namespace stn {

struct Hyperparams {
    float learning_rate = 0.01f;
    float momentum = 0.9f;
    int batch_size = 16;
    int epochs = 30;
    std::uint32_t seed = 1;
    bool augment = false;
    float flip_probability = 0.5f;
    float rotation_limit_deg = 5.0f;
    // Label remap applied when a window is flipped; empty means identity.
    // Needed for class sets where mirroring swaps semantics (left/right).
    std::vector<int> flip_label_permutation;

    void validate() const;
};

struct EpochStats {
    float loss = 0.0f;
    float train_accuracy = 0.0f;
    float val_accuracy = 0.0f;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;  // 1-based
    float best_val_accuracy = 0.0f;

    // `epoch,loss,train_acc,val_acc` per line.
    std::string to_csv() const;
};

struct CrossEntropy {
    float loss = 0.0f;
    std::vector<float> logit_gradient;  // p - onehot(label)
};

CrossEntropy cross_entropy(std::span<const float> probabilities, int label);

// Horizontal mirror / rotation primitives used by augmentation.
Tensor3 flip_horizontal(const Tensor3& frame);
Tensor3 rotate_nearest(const Tensor3& frame, float degrees);  // zero fill

// One flip coin and one rotation angle per window, applied to every frame so
// the sequence stays consistent.
WindowSample augment(const WindowSample& sample, const Hyperparams& hyper, std::mt19937& rng);

struct Evaluation {
    double accuracy = 0.0;
    std::vector<std::vector<int>> confusion;  // [true][predicted]
};

Evaluation evaluate(const Model& model, std::span<const WindowSample> samples);

// Minibatch SGD with momentum on cross-entropy; deterministic given the
// seed. Returns the weights of the best validation epoch.
std::pair<Model, TrainHistory> train(const Model& model, std::span<const WindowSample> train_set,
                                     std::span<const WindowSample> val_set,
                                     const Hyperparams& hyper);

// Compares the analytic end-to-end gradient against central finite
// differences (eps = 1e-3), both evaluated in double precision, over at
// least `coordinates` randomly chosen parameters. Returns the worst
// relative error.
double grad_check(const Model& model, std::span<const Tensor3> frames, int label,
                  int coordinates = 200, std::uint32_t seed = 0);

} // namespace stn

#endif
