#include "stn/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include "stn/backprop.hpp"

namespace stn {

void Hyperparams::validate() const {
    if (learning_rate < 0.0f) throw ConfigError("learning rate must be >= 0");
    if (momentum < 0.0f || momentum >= 1.0f) throw ConfigError("momentum must be in [0, 1)");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (epochs < 1) throw ConfigError("epoch count must be >= 1");
    if (flip_probability < 0.0f || flip_probability > 1.0f) {
        throw ConfigError("flip probability must be in [0, 1]");
    }
}

std::string TrainHistory::to_csv() const {
    std::ostringstream out;
    out << "epoch,loss,train_acc,val_acc\n";
    for (std::size_t e = 0; e < epochs.size(); ++e) {
        out << e + 1 << ',' << epochs[e].loss << ',' << epochs[e].train_accuracy << ','
            << epochs[e].val_accuracy << '\n';
    }
    return out.str();
}

CrossEntropy cross_entropy(std::span<const float> probabilities, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= probabilities.size()) {
        throw InputError("cross_entropy: label " + std::to_string(label) +
                         " out of range for " + std::to_string(probabilities.size()) +
                         " classes");
    }
    CrossEntropy result;
    result.loss = -std::log(std::max(probabilities[label], 1e-12f));
    result.logit_gradient.assign(probabilities.begin(), probabilities.end());
    result.logit_gradient[static_cast<std::size_t>(label)] -= 1.0f;
    return result;
}

Tensor3 flip_horizontal(const Tensor3& frame) {
    Tensor3 out(frame.height, frame.width, frame.channels);
    for (int m = 0; m < frame.height; ++m) {
        for (int n = 0; n < frame.width; ++n) {
            for (int c = 0; c < frame.channels; ++c) {
                out.at(m, n, c) = frame.at(m, frame.width - 1 - n, c);
            }
        }
    }
    return out;
}

Tensor3 rotate_nearest(const Tensor3& frame, float degrees) {
    if (degrees == 0.0f) return frame;
    const double theta = static_cast<double>(degrees) * std::numbers::pi / 180.0;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    const double cy = (frame.height - 1) / 2.0;
    const double cx = (frame.width - 1) / 2.0;

    Tensor3 out(frame.height, frame.width, frame.channels);
    for (int m = 0; m < frame.height; ++m) {
        for (int n = 0; n < frame.width; ++n) {
            // inverse mapping: rotate the target position back into the source
            const double dy = m - cy;
            const double dx = n - cx;
            const int sm = static_cast<int>(std::lround(cy + cos_t * dy - sin_t * dx));
            const int sn = static_cast<int>(std::lround(cx + sin_t * dy + cos_t * dx));
            if (sm < 0 || sm >= frame.height || sn < 0 || sn >= frame.width) continue;
            for (int c = 0; c < frame.channels; ++c) {
                out.at(m, n, c) = frame.at(sm, sn, c);
            }
        }
    }
    return out;
}

WindowSample augment(const WindowSample& sample, const Hyperparams& hyper, std::mt19937& rng) {
    const bool flip = uniform_unit(rng) < hyper.flip_probability;
    const float angle = static_cast<float>(
        uniform_range(rng, -hyper.rotation_limit_deg, hyper.rotation_limit_deg));

    WindowSample out;
    out.label = sample.label;
    if (flip && !hyper.flip_label_permutation.empty()) {
        if (static_cast<std::size_t>(sample.label) >= hyper.flip_label_permutation.size()) {
            throw InputError("flip label permutation does not cover label " +
                             std::to_string(sample.label));
        }
        out.label = hyper.flip_label_permutation[static_cast<std::size_t>(sample.label)];
    }
    out.frames.reserve(sample.frames.size());
    for (const Tensor3& frame : sample.frames) {
        Tensor3 f = flip ? flip_horizontal(frame) : frame;
        out.frames.push_back(rotate_nearest(f, angle));
    }
    return out;
}

namespace {

void check_samples(const Model& model, std::span<const WindowSample> samples, const char* which) {
    for (const WindowSample& s : samples) {
        if (s.frames.size() != static_cast<std::size_t>(model.config.window)) {
            throw InputError(std::string(which) + " sample window length " +
                             std::to_string(s.frames.size()) + " != model window " +
                             std::to_string(model.config.window));
        }
        if (s.label < 0 || s.label >= model.config.classes) {
            throw InputError(std::string(which) + " sample label out of range");
        }
    }
}

int worker_count(std::size_t jobs) {
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::min<std::size_t>(jobs, hw == 0 ? 1 : hw));
}

// Runs fn(i) for i in [0, jobs) across a few threads.
template <class Fn>
void parallel_for(std::size_t jobs, Fn&& fn) {
    const int workers = worker_count(jobs);
    if (workers <= 1) {
        for (std::size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < jobs; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace

Evaluation evaluate(const Model& model, std::span<const WindowSample> samples) {
    if (samples.empty()) throw InputError("evaluate: empty dataset");
    check_samples(model, samples, "eval");

    Evaluation result;
    result.confusion.assign(static_cast<std::size_t>(model.config.classes),
                            std::vector<int>(static_cast<std::size_t>(model.config.classes), 0));
    std::vector<int> predicted(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        predicted[i] =
            classify_window(model, std::span<const Tensor3>(samples[i].frames)).label;
    });
    std::size_t correct = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        result.confusion[static_cast<std::size_t>(samples[i].label)]
                        [static_cast<std::size_t>(predicted[i])]++;
        if (predicted[i] == samples[i].label) ++correct;
    }
    result.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
    return result;
}

std::pair<Model, TrainHistory> train(const Model& model, std::span<const WindowSample> train_set,
                                     std::span<const WindowSample> val_set,
                                     const Hyperparams& hyper) {
    hyper.validate();
    if (train_set.empty() || val_set.empty()) {
        throw InputError("train: train and validation sets must be non-empty");
    }
    check_samples(model, train_set, "train");
    check_samples(model, val_set, "val");

    Model current = model;
    Model best = model;
    TrainHistory history;
    history.best_val_accuracy = -1.0f;

    ModelParams velocity = make_zero_params<float>(model.config);
    ModelParams batch_grad = make_zero_params<float>(model.config);

    std::mt19937 rng(hyper.seed);
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const int decay_epoch = hyper.epochs * 2 / 3;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        const float lr =
            epoch >= decay_epoch ? hyper.learning_rate * 0.1f : hyper.learning_rate;
        deterministic_shuffle(order, rng);

        double epoch_loss = 0.0;
        std::size_t epoch_correct = 0;

        for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
            const std::size_t batch_n =
                std::min<std::size_t>(hyper.batch_size, order.size() - start);

            // Augmentation draws happen sequentially so the rng stream does
            // not depend on thread scheduling.
            std::vector<WindowSample> batch;
            batch.reserve(batch_n);
            for (std::size_t b = 0; b < batch_n; ++b) {
                const WindowSample& src = train_set[order[start + b]];
                batch.push_back(hyper.augment ? augment(src, hyper, rng) : src);
            }

            std::vector<ModelParams> grads(batch_n);
            std::vector<float> losses(batch_n);
            std::vector<char> correct(batch_n);
            parallel_for(batch_n, [&](std::size_t b) {
                grads[b] = make_zero_params<float>(current.config);
                ForwardCacheT<float> cache;
                auto probs = forward_window_cached(
                    current.config, current.params,
                    std::span<const Tensor3>(batch[b].frames), cache);
                const CrossEntropy ce =
                    cross_entropy(std::span<const float>(probs), batch[b].label);
                losses[b] = ce.loss;
                correct[b] = argmax_lowest(std::span<const float>(probs)) ==
                             static_cast<std::size_t>(batch[b].label);
                backward_window(current.params, std::span<const Tensor3>(batch[b].frames),
                                cache, std::span<const float>(ce.logit_gradient), grads[b]);
            });

            // Sum per-sample gradients in sample order: the update is
            // identical no matter how many workers ran.
            zero_params(batch_grad);
            for (std::size_t b = 0; b < batch_n; ++b) {
                accumulate_params(batch_grad, grads[b], 1.0f);
                epoch_loss += losses[b];
                epoch_correct += correct[b] ? 1u : 0u;
            }

            const float inv_batch = 1.0f / static_cast<float>(batch_n);
            auto vel = param_vectors(velocity);
            auto grd = param_vectors(batch_grad);
            auto par = param_vectors(current.params);
            for (std::size_t v = 0; v < vel.size(); ++v) {
                for (std::size_t i = 0; i < vel[v]->size(); ++i) {
                    float& vel_i = (*vel[v])[i];
                    vel_i = hyper.momentum * vel_i - lr * (*grd[v])[i] * inv_batch;
                    (*par[v])[i] += vel_i;
                }
            }
        }

        EpochStats stats;
        stats.loss = static_cast<float>(epoch_loss / static_cast<double>(order.size()));
        stats.train_accuracy =
            static_cast<float>(epoch_correct) / static_cast<float>(order.size());
        stats.val_accuracy = static_cast<float>(evaluate(current, val_set).accuracy);
        history.epochs.push_back(stats);

        if (stats.val_accuracy > history.best_val_accuracy) {
            history.best_val_accuracy = stats.val_accuracy;
            history.best_epoch = epoch + 1;
            best = current;
        }
    }
    return {std::move(best), std::move(history)};
}

double grad_check(const Model& model, std::span<const Tensor3> frames, int label,
                  int coordinates, std::uint32_t seed) {
    ModelParamsT<double> params = params_cast<double>(model.params);
    std::vector<Tensor3T<double>> dframes;
    dframes.reserve(frames.size());
    for (const Tensor3& f : frames) dframes.push_back(tensor_cast<double>(f));

    const auto loss_at = [&](const ModelParamsT<double>& p) {
        std::vector<double> probs = classify_window_probs_t(
            model.config, p, std::span<const Tensor3T<double>>(dframes));
        return -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-300));
    };

    // Analytic gradient, also in double.
    ModelParamsT<double> grads = make_zero_params<double>(model.config);
    {
        ForwardCacheT<double> cache;
        auto probs = forward_window_cached(model.config, params,
                                           std::span<const Tensor3T<double>>(dframes), cache);
        std::vector<double> logit_grad(probs.begin(), probs.end());
        logit_grad[static_cast<std::size_t>(label)] -= 1.0;
        backward_window(params, std::span<const Tensor3T<double>>(dframes), cache,
                        std::span<const double>(logit_grad), grads);
    }

    auto param_view = param_vectors(params);
    auto grad_view = param_vectors(grads);
    std::size_t total = 0;
    for (const auto* v : param_view) total += v->size();

    std::vector<std::size_t> picks;
    if (total <= static_cast<std::size_t>(coordinates)) {
        picks.resize(total);
        for (std::size_t i = 0; i < total; ++i) picks[i] = i;
    } else {
        std::mt19937 rng(seed ^ 0x9e3779b9u);
        std::vector<std::size_t> all(total);
        for (std::size_t i = 0; i < total; ++i) all[i] = i;
        deterministic_shuffle(all, rng);
        picks.assign(all.begin(), all.begin() + coordinates);
    }

    constexpr double eps = 1e-3;
    double worst = 0.0;
    for (std::size_t flat : picks) {
        std::size_t v = 0;
        std::size_t off = flat;
        while (off >= param_view[v]->size()) {
            off -= param_view[v]->size();
            ++v;
        }
        double& theta = (*param_view[v])[off];
        const double saved = theta;
        theta = saved + eps;
        const double loss_plus = loss_at(params);
        theta = saved - eps;
        const double loss_minus = loss_at(params);
        theta = saved;

        const double numeric = (loss_plus - loss_minus) / (2.0 * eps);
        const double analytic = (*grad_view[v])[off];
        const double denom = std::max(std::abs(numeric), std::abs(analytic));
        if (denom < 1e-12) continue;  // both vanish
        worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
    return worst;
}

} // namespace stn
