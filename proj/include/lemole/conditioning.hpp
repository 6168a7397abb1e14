#ifndef LEMOLE_CONDITIONING_HPP
#define LEMOLE_CONDITIONING_HPP

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "lemole/experts.hpp"
#include "lemole/matrix.hpp"
#include "lemole/prompts.hpp"

namespace lemole {

/// Two-stage linear map from a prompt embedding to an H x C FiLM parameter:
/// channel_map collapses the embedding dimension to C, time_map collapses the
/// token axis to H.
struct FilmGenerator {
    Matrix channel_map;               // d_llm x C
    std::vector<double> channel_bias; // C
    Matrix time_map;                  // L x H
    std::vector<double> time_bias;    // H

    bool empty() const { return channel_map.empty(); }
};

struct FilmGrads {
    Matrix d_channel_map;
    std::vector<double> d_channel_bias;
    Matrix d_time_map;
    std::vector<double> d_time_bias;
};

/// Same-length 1-D convolution along the forecast axis, applied independently
/// per variate. Channels are expert or branch outputs.
struct Conv1d {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 0;   // odd
    Matrix kernels;           // out_channels x (in_channels * kernel)
    std::vector<double> bias; // out_channels

    bool empty() const { return kernels.empty(); }
    double tap(std::size_t o, std::size_t i, std::size_t j) const {
        return kernels(o, i * kernel + j);
    }
};

struct ConvGrads {
    Matrix d_kernels;
    std::vector<double> d_bias;
};

enum class ConditioningMode {
    Aggregate, // condition the CNN-aggregated mixture once per branch
    PerExpert, // apply static then dynamic FiLM to each expert output
};

struct ModelHyper {
    std::size_t T = 0;
    std::size_t H = 0;
    std::size_t C = 0;
    std::size_t M = 0;
    std::size_t d_llm = 0;
    std::size_t L_S = 0;
    std::size_t L_D = 0;
    std::size_t conv_kernel = 3;
};

struct LemoleModel {
    ExpertBank bank;
    Conv1d agg_conv;   // in=M, out=1 (Aggregate mode only)
    FilmGenerator gen_gamma_s, gen_beta_s;
    FilmGenerator gen_gamma_d, gen_beta_d;
    Conv1d final_conv;
    ConditioningMode mode = ConditioningMode::Aggregate;
    bool has_static = true;
    bool has_dynamic = true;
    ModelHyper hyper;
};

struct ModelGrads {
    std::vector<LinearExpertGrads> linear;
    std::vector<FreqExpertGrads> freq;
    ConvGrads agg, final;
    FilmGrads gamma_s, beta_s, gamma_d, beta_d;
};

/// Everything the backward pass needs from a forward evaluation. Borrows the
/// embeddings passed to model_forward; keep them alive until backward ran.
struct ForwardTrace {
    std::vector<Matrix> views;
    std::vector<Matrix> expert_outs;
    Matrix Y; // aggregated mixture (Aggregate mode)
    Matrix A_gamma_s, A_beta_s, A_gamma_d, A_beta_d; // L x C channel-map stages
    Matrix gamma_s, beta_s, gamma_d, beta_d;         // H x C
    Matrix yp_s, yp_d;                               // conditioned branches (Aggregate)
    std::vector<Matrix> stage_static;                // PerExpert: outputs after static FiLM
    std::vector<Matrix> fused;                       // PerExpert: after both FiLM stages
    std::vector<Matrix> final_stack;                 // final conv input channels, in order
    Matrix y_hat;
    const Matrix* Z_S = nullptr;
    const Matrix* Z_D = nullptr;
};

FilmGenerator make_film_generator(std::size_t L, std::size_t d_llm, std::size_t H, std::size_t C,
                                  Rng& rng, double output_bias);
Conv1d make_conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, Rng& rng);

struct ModelConfig {
    ModelHyper hyper;
    std::vector<std::size_t> window_lengths; // defaults to window_schedule(T, M) when empty
    ExpertDomain domain = ExpertDomain::Time;
    ConditioningMode mode = ConditioningMode::Aggregate;
    bool has_static = true;
    bool has_dynamic = true;
    double freq_init_noise = 1e-3;
};

LemoleModel make_model(const ModelConfig& config, Rng& rng);

/// gamma or beta for one branch: Z is L x d_llm, result is H x C. When
/// `channel_stage` is given the L x C intermediate is stored for backward.
Matrix film_params(const FilmGenerator& gen, const Matrix& Z, Matrix* channel_stage = nullptr);

Matrix film_apply(const Matrix& gamma, const Matrix& beta, const Matrix& y);

std::vector<Matrix> conv1d_forward(const Conv1d& conv, const std::vector<Matrix>& stack);
std::vector<Matrix> conv1d_backward(const Conv1d& conv, const std::vector<Matrix>& stack,
                                    const std::vector<Matrix>& upstream, ConvGrads& grads);

void film_generator_backward(const FilmGenerator& gen, const Matrix& Z, const Matrix& channel_stage,
                             const Matrix& upstream, FilmGrads& grads);

ForwardTrace model_forward(const LemoleModel& model, const Matrix& lookback, const Matrix& Z_S,
                           const Matrix& Z_D);

ModelGrads zero_grads(const LemoleModel& model);
void model_backward(const LemoleModel& model, const ForwardTrace& trace, const Matrix& upstream,
                    ModelGrads& grads);

std::size_t count_params(const LemoleModel& model);

/// Canonical flat views over every trainable tensor; parameter, gradient and
/// optimizer-state traversals all share this order.
struct TensorRef {
    std::string name;
    std::vector<double>* data;
};
std::vector<TensorRef> param_tensors(LemoleModel& model);
std::vector<TensorRef> grad_tensors(ModelGrads& grads);

void accumulate(ModelGrads& into, const ModelGrads& from);
void scale_grads(ModelGrads& grads, double factor);

} // namespace lemole

#endif // LEMOLE_CONDITIONING_HPP
