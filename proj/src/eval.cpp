#include "lemole/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "lemole/errors.hpp"

namespace lemole {

double mae(const Matrix& pred, const Matrix& target) {
    pred.require_same_shape(target, "mae");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        total += std::fabs(pred.storage()[i] - target.storage()[i]);
    return total / static_cast<double>(pred.size());
}

namespace {

struct Accumulator {
    double se_sum = 0.0;
    double ae_sum = 0.0;
    std::size_t entries = 0;

    void add(const Matrix& pred, const Matrix& target) {
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = pred.storage()[i] - target.storage()[i];
            se_sum += d * d;
            ae_sum += std::fabs(d);
        }
        entries += pred.size();
    }

    void merge(const Accumulator& other) {
        se_sum += other.se_sum;
        ae_sum += other.ae_sum;
        entries += other.entries;
    }
};

} // namespace

EvalResult evaluate(const LemoleModel& model, const SeriesFrame& frame,
                    EmbeddingProvider& provider, const DatasetMeta& meta,
                    const EvalOptions& options) {
    const auto windows = make_windows(frame, model.hyper.T, model.hyper.H, options.stride);

    MemoizingProvider memo(std::shared_ptr<EmbeddingProvider>(&provider, [](EmbeddingProvider*) {}));
    Matrix Z_S;
    if (model.has_static) Z_S = memo.embed(render_static_prompt(meta)).matrix;
    std::vector<Matrix> Z_D(windows.size());
    if (model.has_dynamic)
        for (std::size_t i = 0; i < windows.size(); ++i)
            Z_D[i] = memo.embed(render_dynamic_prompt(windows[i].lookback_timestamps,
                                                      frame.freq_seconds))
                         .matrix;

    const std::size_t n_threads = std::max<std::size_t>(1, options.threads);
    std::vector<Accumulator> std_acc(n_threads), raw_acc(n_threads);
    auto work = [&](std::size_t worker) {
        for (std::size_t i = worker; i < windows.size(); i += n_threads) {
            const auto trace = model_forward(model, windows[i].lookback, Z_S, Z_D[i]);
            std_acc[worker].add(trace.y_hat, windows[i].target);
            if (options.raw_scale_stats) {
                const auto pred_raw = destandardize(trace.y_hat, *options.raw_scale_stats);
                const auto target_raw = destandardize(windows[i].target, *options.raw_scale_stats);
                raw_acc[worker].add(pred_raw, target_raw);
            }
        }
    };
    if (n_threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n_threads; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    // Reduce in worker-index order so results are stable for a fixed thread count.
    Accumulator std_total, raw_total;
    for (std::size_t w = 0; w < n_threads; ++w) {
        std_total.merge(std_acc[w]);
        raw_total.merge(raw_acc[w]);
    }

    EvalResult result;
    result.standardized.horizon = model.hyper.H;
    result.standardized.n_windows = windows.size();
    result.standardized.dataset_id = meta.name;
    result.standardized.mse = std_total.se_sum / static_cast<double>(std_total.entries);
    result.standardized.mae = std_total.ae_sum / static_cast<double>(std_total.entries);
    if (options.raw_scale_stats) {
        MetricReport raw = result.standardized;
        raw.mse = raw_total.se_sum / static_cast<double>(raw_total.entries);
        raw.mae = raw_total.ae_sum / static_cast<double>(raw_total.entries);
        result.raw = raw;
    }
    return result;
}

MetricReport persistence_metrics(const SeriesFrame& frame, std::size_t T, std::size_t H,
                                 std::size_t stride) {
    const auto windows = make_windows(frame, T, H, stride);
    Accumulator acc;
    for (const auto& w : windows) {
        Matrix pred(H, w.target.cols());
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t c = 0; c < w.target.cols(); ++c)
                pred(h, c) = w.lookback(T - 1, c);
        acc.add(pred, w.target);
    }
    MetricReport report;
    report.horizon = H;
    report.n_windows = windows.size();
    report.mse = acc.se_sum / static_cast<double>(acc.entries);
    report.mae = acc.ae_sum / static_cast<double>(acc.entries);
    return report;
}

const char* to_string(PBucket bucket) {
    switch (bucket) {
        case PBucket::Below1: return "<0.01";
        case PBucket::Below5: return "<0.05";
        case PBucket::Below10: return "<0.10";
        case PBucket::AtLeast10: return ">=0.10";
    }
    return "?";
}

namespace {

// Gaussian elimination with partial pivoting; A is square, returns A^-1 * B
// columns alongside the inverse diagonal needed for standard errors.
std::vector<double> solve_normal_equations(std::vector<std::vector<double>> xtx,
                                           std::vector<double> xty, double* rho_var_factor,
                                           std::size_t rho_index) {
    const std::size_t k = xty.size();
    // Augment with the identity to recover (X^T X)^-1 for the rho column.
    std::vector<std::vector<double>> aug(k, std::vector<double>(2 * k, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) aug[i][j] = xtx[i][j];
        aug[i][k + i] = 1.0;
    }
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < k; ++r)
            if (std::fabs(aug[r][col]) > std::fabs(aug[pivot][col])) pivot = r;
        if (std::fabs(aug[pivot][col]) < 1e-12)
            fail(ErrorCode::SingularRegression, "ADF design matrix is singular");
        std::swap(aug[col], aug[pivot]);
        std::swap(xty[col], xty[pivot]);
        const double d = aug[col][col];
        for (double& v : aug[col]) v /= d;
        xty[col] /= d;
        for (std::size_t r = 0; r < k; ++r) {
            if (r == col) continue;
            const double f = aug[r][col];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < 2 * k; ++j) aug[r][j] -= f * aug[col][j];
            xty[r] -= f * xty[col];
        }
    }
    *rho_var_factor = aug[rho_index][k + rho_index];
    return xty;
}

} // namespace

AdfResult adf_statistic(const std::vector<double>& series, std::optional<std::size_t> max_lag) {
    const std::size_t n = series.size();
    if (n < 20) fail(ErrorCode::SeriesTooShort, "ADF needs at least 20 observations");

    const std::size_t p = max_lag.value_or(static_cast<std::size_t>(
        std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25))));

    // dx_t = alpha + rho * x_{t-1} + sum_{i=1..p} phi_i * dx_{t-i} + e_t
    const std::size_t first = p + 1; // first usable t index into the series
    if (n <= first + 2) fail(ErrorCode::SeriesTooShort, "too few observations for the lag order");
    const std::size_t nobs = n - first;
    const std::size_t k = 2 + p; // alpha, rho, phi_1..phi_p

    std::vector<double> dx(n, 0.0);
    for (std::size_t t = 1; t < n; ++t) dx[t] = series[t] - series[t - 1];

    auto regressor = [&](std::size_t t, std::size_t j) -> double {
        if (j == 0) return 1.0;
        if (j == 1) return series[t - 1];
        return dx[t - (j - 1)];
    };

    std::vector<std::vector<double>> xtx(k, std::vector<double>(k, 0.0));
    std::vector<double> xty(k, 0.0);
    for (std::size_t t = first; t < n; ++t) {
        for (std::size_t a = 0; a < k; ++a) {
            const double xa = regressor(t, a);
            xty[a] += xa * dx[t];
            for (std::size_t b = a; b < k; ++b) xtx[a][b] += xa * regressor(t, b);
        }
    }
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < a; ++b) xtx[a][b] = xtx[b][a];

    double rho_var_factor = 0.0;
    const auto beta = solve_normal_equations(xtx, xty, &rho_var_factor, 1);

    double ssr = 0.0;
    for (std::size_t t = first; t < n; ++t) {
        double fit = 0.0;
        for (std::size_t a = 0; a < k; ++a) fit += beta[a] * regressor(t, a);
        const double e = dx[t] - fit;
        ssr += e * e;
    }
    if (nobs <= k) fail(ErrorCode::SeriesTooShort, "no residual degrees of freedom");
    const double sigma2 = ssr / static_cast<double>(nobs - k);
    const double se_rho = std::sqrt(sigma2 * rho_var_factor);
    if (!(se_rho > 0.0)) fail(ErrorCode::SingularRegression, "zero standard error for rho");

    AdfResult result;
    result.statistic = beta[1] / se_rho;
    result.lag_order = p;
    if (result.statistic < -3.43)
        result.p_bucket = PBucket::Below1;
    else if (result.statistic < -2.86)
        result.p_bucket = PBucket::Below5;
    else if (result.statistic < -2.57)
        result.p_bucket = PBucket::Below10;
    else
        result.p_bucket = PBucket::AtLeast10;
    return result;
}

namespace {

AblationRow run_variant(const std::string& name, TrainConfig config, PromptDrop drop,
                        const SeriesFrame& train_frame, const SeriesFrame& val_frame,
                        const SeriesFrame& test_frame, EmbeddingProvider& provider,
                        const DatasetMeta& meta, std::size_t eval_stride) {
    config.has_static = drop != PromptDrop::Static && drop != PromptDrop::Both;
    config.has_dynamic = drop != PromptDrop::Dynamic && drop != PromptDrop::Both;
    auto trained = train(config, train_frame, val_frame, provider, meta);
    EvalOptions opts;
    opts.stride = eval_stride;
    const auto result = evaluate(trained.model, test_frame, provider, meta, opts);
    AblationRow row;
    row.variant = name;
    row.mse = result.standardized.mse;
    row.mae = result.standardized.mae;
    row.params = count_params(trained.model);
    return row;
}

} // namespace

std::vector<AblationRow> ablate(const TrainConfig& config, const SeriesFrame& train_frame,
                                const SeriesFrame& val_frame, const SeriesFrame& test_frame,
                                EmbeddingProvider& provider, const DatasetMeta& meta,
                                std::size_t eval_stride) {
    std::vector<AblationRow> rows;
    rows.push_back(run_variant("full", config, PromptDrop::None, train_frame, val_frame,
                               test_frame, provider, meta, eval_stride));
    rows.push_back(run_variant("wo_static", config, PromptDrop::Static, train_frame, val_frame,
                               test_frame, provider, meta, eval_stride));
    rows.push_back(run_variant("wo_dynamic", config, PromptDrop::Dynamic, train_frame, val_frame,
                               test_frame, provider, meta, eval_stride));
    rows.push_back(run_variant("wo_both", config, PromptDrop::Both, train_frame, val_frame,
                               test_frame, provider, meta, eval_stride));
    const double full_mse = rows.front().mse;
    for (auto& row : rows)
        row.degradation_pct = full_mse == 0.0 ? 0.0 : (row.mse - full_mse) / full_mse * 100.0;
    return rows;
}

std::vector<SweepRow> expert_sweep(const TrainConfig& config, const SeriesFrame& train_frame,
                                   const SeriesFrame& val_frame, const SeriesFrame& test_frame,
                                   EmbeddingProvider& provider, const DatasetMeta& meta,
                                   const std::vector<std::size_t>& m_values,
                                   std::size_t eval_stride) {
    std::vector<SweepRow> rows;
    for (std::size_t m : m_values) {
        TrainConfig variant = config;
        variant.M = m;
        variant.window_lengths.clear(); // schedule follows M
        auto trained = train(variant, train_frame, val_frame, provider, meta);
        EvalOptions opts;
        opts.stride = eval_stride;
        const auto result = evaluate(trained.model, test_frame, provider, meta, opts);
        rows.push_back({m, result.standardized.mse, result.standardized.mae,
                        count_params(trained.model)});
    }
    return rows;
}

BenchReport bench(LemoleModel& model, const GradCheckSample& sample, std::size_t batch,
                  std::size_t reps, const TrainConfig& config) {
    if (reps < 10) fail(ErrorCode::InvalidArgument, "bench needs reps >= 10");
    BenchReport report;
    report.params = count_params(model);
    report.batch = batch;
    report.reps = reps;

    auto train_step = [&]() {
        ModelGrads grads = zero_grads(model);
        AdamState adam = make_adam_state(model);
        const double inv = 1.0 / static_cast<double>(batch);
        for (std::size_t b = 0; b < batch; ++b) {
            const auto trace = model_forward(model, sample.lookback, sample.Z_S, sample.Z_D);
            auto [loss, grad] = mse_loss(trace.y_hat, sample.target);
            (void)loss;
            grad *= inv;
            model_backward(model, trace, grad, grads);
        }
        adam_step(adam, model, grads, config);
    };
    auto infer_step = [&]() {
        const auto trace = model_forward(model, sample.lookback, sample.Z_S, sample.Z_D);
        (void)trace;
    };

    auto time_median = [&](auto&& fn) {
        for (int i = 0; i < 3; ++i) fn();
        std::vector<double> samples;
        samples.reserve(reps);
        for (std::size_t i = 0; i < reps; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            fn();
            const auto t1 = std::chrono::steady_clock::now();
            samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
        std::sort(samples.begin(), samples.end());
        return samples[samples.size() / 2];
    };

    // Benchmark mutates parameters through the Adam step; preserve them.
    LemoleModel snapshot = model;
    report.train_ms_per_step = time_median(train_step);
    copy_params(snapshot, model);
    report.infer_ms_per_window = time_median(infer_step);
    return report;
}

} // namespace lemole
