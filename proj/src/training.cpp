#include "lemole/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "lemole/errors.hpp"

namespace lemole {

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) fail(ErrorCode::InvalidArgument, "learning_rate must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        fail(ErrorCode::InvalidArgument, "adam betas must lie in [0,1)");
    if (batch_size == 0) fail(ErrorCode::InvalidArgument, "batch_size must be >= 1");
    if (patience == 0) fail(ErrorCode::InvalidArgument, "patience must be >= 1");
    if (T == 0 || H == 0 || M == 0) fail(ErrorCode::InvalidArgument, "T, H, M must be >= 1");
    if (train_stride == 0 || eval_stride == 0)
        fail(ErrorCode::InvalidArgument, "strides must be >= 1");
}

AdamState make_adam_state(const LemoleModel& model) {
    AdamState state;
    state.m = zero_grads(model);
    state.v = zero_grads(model);
    state.step = 0;
    return state;
}

void adam_step(AdamState& state, LemoleModel& model, ModelGrads& grads, const TrainConfig& config) {
    ++state.step;
    const double b1 = config.beta1;
    const double b2 = config.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    auto params = param_tensors(model);
    auto g = grad_tensors(grads);
    auto m = grad_tensors(state.m);
    auto v = grad_tensors(state.v);
    if (params.size() != g.size() || params.size() != m.size())
        fail(ErrorCode::ShapeMismatch, "adam state does not match model structure");
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto& p = *params[t].data;
        auto& gt = *g[t].data;
        auto& mt = *m[t].data;
        auto& vt = *v[t].data;
        for (std::size_t i = 0; i < p.size(); ++i) {
            mt[i] = b1 * mt[i] + (1.0 - b1) * gt[i];
            vt[i] = b2 * vt[i] + (1.0 - b2) * gt[i] * gt[i];
            const double m_hat = mt[i] / bc1;
            const double v_hat = vt[i] / bc2;
            p[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
        }
    }
}

std::pair<double, Matrix> mse_loss(const Matrix& pred, const Matrix& target) {
    pred.require_same_shape(target, "mse_loss");
    const double n = static_cast<double>(pred.size());
    double loss = 0.0;
    Matrix grad(pred.rows(), pred.cols());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.storage()[i] - target.storage()[i];
        loss += d * d;
        grad.storage()[i] = 2.0 * d / n;
    }
    return {loss / n, grad};
}

void copy_params(const LemoleModel& from, LemoleModel& to) {
    auto src = param_tensors(const_cast<LemoleModel&>(from));
    auto dst = param_tensors(to);
    if (src.size() != dst.size()) fail(ErrorCode::ShapeMismatch, "parameter structure mismatch");
    for (std::size_t t = 0; t < src.size(); ++t) {
        if (src[t].data->size() != dst[t].data->size())
            fail(ErrorCode::ShapeMismatch, "parameter tensor size mismatch at " + src[t].name);
        *dst[t].data = *src[t].data;
    }
}

namespace {

double evaluate_mean_mse(const LemoleModel& model, const std::vector<WindowSample>& windows,
                         const Matrix& Z_S, const std::vector<Matrix>& Z_D_per_window) {
    double total = 0.0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto trace = model_forward(model, windows[i].lookback, Z_S, Z_D_per_window[i]);
        total += mse_loss(trace.y_hat, windows[i].target).first;
    }
    return windows.empty() ? 0.0 : total / static_cast<double>(windows.size());
}

} // namespace

TrainResult train(const TrainConfig& config, const SeriesFrame& train_frame,
                  const SeriesFrame& val_frame, EmbeddingProvider& provider,
                  const DatasetMeta& meta) {
    config.validate();
    const std::size_t C = train_frame.channels();

    auto train_windows = make_windows(train_frame, config.T, config.H, config.train_stride);
    auto val_windows = make_windows(val_frame, config.T, config.H, config.eval_stride);

    // Frozen embeddings: static once, dynamic once per distinct rendered text.
    MemoizingProvider memo(std::shared_ptr<EmbeddingProvider>(&provider, [](EmbeddingProvider*) {}));
    Matrix Z_S;
    std::size_t L_S = 1;
    if (config.has_static) {
        Z_S = memo.embed(render_static_prompt(meta)).matrix;
        L_S = Z_S.rows();
    }
    auto embed_dynamic = [&](const WindowSample& w) -> Matrix {
        return memo.embed(render_dynamic_prompt(w.lookback_timestamps, train_frame.freq_seconds))
            .matrix;
    };
    std::vector<Matrix> Z_D_train(train_windows.size());
    std::vector<Matrix> Z_D_val(val_windows.size());
    std::size_t L_D = 1;
    if (config.has_dynamic) {
        for (std::size_t i = 0; i < train_windows.size(); ++i) {
            Z_D_train[i] = embed_dynamic(train_windows[i]);
            if (i == 0)
                L_D = Z_D_train[i].rows();
            else if (Z_D_train[i].rows() != L_D)
                fail(ErrorCode::EmbeddingShapeInvalid,
                     "dynamic embeddings must share a fixed token count");
        }
        for (std::size_t i = 0; i < val_windows.size(); ++i) {
            Z_D_val[i] = embed_dynamic(val_windows[i]);
            if (Z_D_val[i].rows() != L_D)
                fail(ErrorCode::EmbeddingShapeInvalid,
                     "dynamic embeddings must share a fixed token count");
        }
    } else {
        for (auto& z : Z_D_train) z = Matrix();
        for (auto& z : Z_D_val) z = Matrix();
    }

    ModelConfig mc;
    mc.hyper = {config.T, config.H, C, config.M, config.d_llm, L_S, L_D, config.conv_kernel};
    mc.window_lengths = config.window_lengths;
    mc.domain = config.domain;
    mc.mode = config.mode;
    mc.has_static = config.has_static;
    mc.has_dynamic = config.has_dynamic;
    mc.freq_init_noise = config.freq_init_noise;
    Rng rng(config.seed);
    LemoleModel model = make_model(mc, rng);

    TrainResult result{model, {}};
    if (config.epochs == 0) return result;

    AdamState adam = make_adam_state(model);
    LemoleModel best = model;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t epochs_since_improve = 0;

    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::uint64_t shuffle_state = config.seed ^ (0x51ed2700ULL + epoch);
        Rng shuffle_rng(splitmix64(shuffle_state));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        ModelGrads grads = zero_grads(model);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            scale_grads(grads, 0.0);
            for (std::size_t k = start; k < end; ++k) {
                const WindowSample& w = train_windows[order[k]];
                const Matrix& z_d = Z_D_train[order[k]];
                const auto trace = model_forward(model, w.lookback, Z_S, z_d);
                auto [loss, grad] = mse_loss(trace.y_hat, w.target);
                if (!std::isfinite(loss))
                    fail(ErrorCode::DivergenceDetected,
                         "non-finite loss at epoch " + std::to_string(epoch));
                epoch_loss += loss;
                grad *= inv_batch;
                model_backward(model, trace, grad, grads);
            }
            adam_step(adam, model, grads, config);
        }
        epoch_loss /= static_cast<double>(train_windows.size());

        const double val_loss = evaluate_mean_mse(model, val_windows, Z_S, Z_D_val);
        if (!std::isfinite(val_loss))
            fail(ErrorCode::DivergenceDetected, "non-finite validation loss");
        const auto t1 = std::chrono::steady_clock::now();
        result.history.train_mse.push_back(epoch_loss);
        result.history.val_mse.push_back(val_loss);
        result.history.epoch_ms.push_back(
            std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count());

        if (val_loss < best_val) {
            best_val = val_loss;
            best_epoch = epoch;
            copy_params(model, best);
            epochs_since_improve = 0;
        } else if (++epochs_since_improve >= config.patience) {
            break;
        }
    }

    result.history.best_epoch = best_epoch;
    result.model = std::move(best);
    return result;
}

GradCheckReport grad_check(LemoleModel& model, const GradCheckSample& sample, double eps) {
    if (eps <= 0.0) fail(ErrorCode::InvalidArgument, "grad_check eps must be > 0");

    ModelGrads analytic = zero_grads(model);
    {
        const auto trace = model_forward(model, sample.lookback, sample.Z_S, sample.Z_D);
        const auto [loss, grad] = mse_loss(trace.y_hat, sample.target);
        (void)loss;
        model_backward(model, trace, grad, analytic);
    }

    auto loss_at = [&]() {
        const auto trace = model_forward(model, sample.lookback, sample.Z_S, sample.Z_D);
        return mse_loss(trace.y_hat, sample.target).first;
    };

    GradCheckReport report;
    auto params = param_tensors(model);
    auto grads = grad_tensors(analytic);
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto& p = *params[t].data;
        const auto& g = *grads[t].data;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p[i];
            p[i] = saved + eps;
            const double plus = loss_at();
            p[i] = saved - eps;
            const double minus = loss_at();
            p[i] = saved;
            const double fd = (plus - minus) / (2.0 * eps);
            const double rel = std::fabs(g[i] - fd) / (std::fabs(g[i]) + 1e-8);
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_tensor = params[t].name;
                report.worst_index = i;
            }
        }
    }
    return report;
}

} // namespace lemole
