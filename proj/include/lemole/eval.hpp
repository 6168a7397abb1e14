#ifndef LEMOLE_EVAL_HPP
#define LEMOLE_EVAL_HPP

#include <optional>
#include <string>
#include <vector>

#include "lemole/training.hpp"

namespace lemole {

struct MetricReport {
    std::size_t horizon = 0;
    double mse = 0.0;
    double mae = 0.0;
    std::size_t n_windows = 0;
    std::string dataset_id;
    std::string config_hash;
};

double mae(const Matrix& pred, const Matrix& target);

/// Dense-window metrics on an (already standardized) frame. The optional
/// stats enable additionally reporting raw-scale metrics.
struct EvalOptions {
    std::size_t stride = 1;
    std::size_t threads = 1;
    std::optional<ChannelStats> raw_scale_stats;
};

struct EvalResult {
    MetricReport standardized;
    std::optional<MetricReport> raw;
};

EvalResult evaluate(const LemoleModel& model, const SeriesFrame& frame,
                    EmbeddingProvider& provider, const DatasetMeta& meta,
                    const EvalOptions& options = {});

/// Last-observation-carried-forward baseline over the same windows.
MetricReport persistence_metrics(const SeriesFrame& frame, std::size_t T, std::size_t H,
                                 std::size_t stride);

enum class PBucket { Below1, Below5, Below10, AtLeast10 };

struct AdfResult {
    double statistic = 0.0;
    std::size_t lag_order = 0;
    PBucket p_bucket = PBucket::AtLeast10;
};

const char* to_string(PBucket bucket);

/// Augmented Dickey-Fuller regression (constant, no trend) fitted by OLS:
/// dx_t = alpha + rho*x_{t-1} + sum phi_i dx_{t-i}. Statistic is rho/se(rho);
/// lag order defaults to the Schwert rule floor(12*(n/100)^0.25). Buckets use
/// the MacKinnon constant-only critical values -3.43 / -2.86 / -2.57.
AdfResult adf_statistic(const std::vector<double>& series,
                        std::optional<std::size_t> max_lag = std::nullopt);

enum class PromptDrop { None, Static, Dynamic, Both };

struct AblationRow {
    std::string variant;
    double mse = 0.0;
    double mae = 0.0;
    double degradation_pct = 0.0; // vs full model
    std::size_t params = 0;
};

/// Trains the full model and the three prompt-dropped variants with a shared
/// seed and data. Dropping a branch removes its generators and its channel
/// from the final fusion.
std::vector<AblationRow> ablate(const TrainConfig& config, const SeriesFrame& train_frame,
                                const SeriesFrame& val_frame, const SeriesFrame& test_frame,
                                EmbeddingProvider& provider, const DatasetMeta& meta,
                                std::size_t eval_stride = 1);

struct SweepRow {
    std::size_t M = 0;
    double mse = 0.0;
    double mae = 0.0;
    std::size_t params = 0;
};

std::vector<SweepRow> expert_sweep(const TrainConfig& config, const SeriesFrame& train_frame,
                                   const SeriesFrame& val_frame, const SeriesFrame& test_frame,
                                   EmbeddingProvider& provider, const DatasetMeta& meta,
                                   const std::vector<std::size_t>& m_values,
                                   std::size_t eval_stride = 1);

struct BenchReport {
    std::size_t params = 0;
    double train_ms_per_step = 0.0;
    double infer_ms_per_window = 0.0;
    std::size_t batch = 0;
    std::size_t reps = 0;
};

/// Median over reps after 3 warm-up iterations. `sample` supplies the shapes.
BenchReport bench(LemoleModel& model, const GradCheckSample& sample, std::size_t batch,
                  std::size_t reps, const TrainConfig& config);

} // namespace lemole

#endif // LEMOLE_EVAL_HPP
