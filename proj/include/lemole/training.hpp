#ifndef LEMOLE_TRAINING_HPP
#define LEMOLE_TRAINING_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lemole/conditioning.hpp"
#include "lemole/data.hpp"
#include "lemole/prompts.hpp"

namespace lemole {

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t patience = 5;
    std::uint64_t seed = 0;

    std::size_t T = 96;
    std::size_t H = 24;
    std::size_t M = 3;
    std::vector<std::size_t> window_lengths; // empty -> window_schedule(T, M)
    ConditioningMode mode = ConditioningMode::Aggregate;
    ExpertDomain domain = ExpertDomain::Time;
    std::size_t d_llm = 768;
    std::size_t conv_kernel = 3;
    double freq_init_noise = 1e-3;
    std::size_t train_stride = 1;
    std::size_t eval_stride = 1;
    bool has_static = true;
    bool has_dynamic = true;

    void validate() const;
};

/// Adam moment accumulators, shaped exactly like the model parameters.
struct AdamState {
    ModelGrads m;
    ModelGrads v;
    long step = 0;
};

AdamState make_adam_state(const LemoleModel& model);

/// Textbook Adam with bias correction; deterministic.
void adam_step(AdamState& state, LemoleModel& model, ModelGrads& grads, const TrainConfig& config);

/// Mean squared error over all H*C entries plus its gradient 2*(pred-t)/(H*C).
std::pair<double, Matrix> mse_loss(const Matrix& pred, const Matrix& target);

struct TrainHistory {
    std::vector<double> train_mse;
    std::vector<double> val_mse;
    std::vector<long> epoch_ms;
    std::size_t best_epoch = 0;
};

struct TrainResult {
    LemoleModel model;
    TrainHistory history;
};

/// End-to-end training: the static embedding is computed once, dynamic
/// embeddings are memoized per rendered prompt, windows are shuffled per
/// epoch with the run seed, validation MSE drives patience-based early
/// stopping, and the best-validation parameters are returned.
/// Frames are expected to be standardized already.
TrainResult train(const TrainConfig& config, const SeriesFrame& train_frame,
                  const SeriesFrame& val_frame, EmbeddingProvider& provider,
                  const DatasetMeta& meta);

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_tensor;
    std::size_t worst_index = 0;
};

struct GradCheckSample {
    Matrix lookback;
    Matrix target;
    Matrix Z_S;
    Matrix Z_D;
};

/// Central finite differences for every parameter against the analytic
/// gradients; relative error is |analytic - fd| / (|analytic| + 1e-8).
GradCheckReport grad_check(LemoleModel& model, const GradCheckSample& sample, double eps);

/// Copy parameter values between identically-structured models.
void copy_params(const LemoleModel& from, LemoleModel& to);

} // namespace lemole

#endif // LEMOLE_TRAINING_HPP
