#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lemole/checkpoint.hpp"
#include "lemole/config.hpp"
#include "lemole/errors.hpp"
#include "lemole/eval.hpp"
#include "lemole/synthetic.hpp"

namespace fs = std::filesystem;
using namespace lemole;

namespace {

struct CommonFlags {
    std::string out_dir;
    bool quiet = false;
    long long seed = -1;
    std::size_t threads = 1;
    std::vector<std::string> overrides; // section.key=value
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--out-dir", flags.out_dir, "Output directory (overrides output.dir)");
    cmd->add_flag("--quiet", flags.quiet, "Suppress progress output");
    cmd->add_option("--seed", flags.seed, "Override train.seed");
    cmd->add_option("--threads", flags.threads, "Worker cap for evaluation")->default_val(1);
    cmd->add_option("--set", flags.overrides, "Override a config key: section.key=value");
}

RunConfig load_config(const std::string& path, const CommonFlags& flags) {
    RunConfig config = parse_run_config(path);
    for (const auto& item : flags.overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::ConfigError, "--set expects section.key=value, got " + item);
        apply_override(config, item.substr(0, eq), item.substr(eq + 1));
    }
    if (flags.seed >= 0)
        apply_override(config, "train.seed", std::to_string(flags.seed));
    if (!flags.out_dir.empty()) apply_override(config, "output.dir", flags.out_dir);
    return config;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::MissingArtifact, "cannot write " + path.string());
    out << text;
}

struct PreparedData {
    SeriesFrame train, val, test;
    ChannelStats stats;
    DatasetMeta meta;
};

PreparedData prepare_data(const RunConfig& config) {
    const SeriesFrame frame = load_config_dataset(config);
    auto [train_f, val_f, test_f] = chrono_split(frame, config.split);
    if (config.few_shot_fraction < 1.0)
        train_f = few_shot_subset(train_f, config.few_shot_fraction);
    PreparedData data;
    data.stats = fit_stats(train_f);
    data.train = standardize(train_f, data.stats);
    data.val = standardize(val_f, data.stats);
    data.test = standardize(test_f, data.stats);
    data.meta = effective_meta(config, frame);
    return data;
}

std::string history_csv(const TrainHistory& history, bool timing) {
    std::ostringstream out;
    out << "epoch,train_mse,val_mse,ms\n";
    for (std::size_t e = 0; e < history.train_mse.size(); ++e)
        out << e << "," << fmt17(history.train_mse[e]) << "," << fmt17(history.val_mse[e]) << ","
            << (timing ? history.epoch_ms[e] : 0) << "\n";
    return out.str();
}

int cmd_train(const std::string& config_path, const CommonFlags& flags) {
    RunConfig config = load_config(config_path, flags);
    const PreparedData data = prepare_data(config);
    auto provider = make_provider(config);

    auto result = train(config.train, data.train, data.val, *provider, data.meta);

    fs::create_directories(config.out_dir);
    save_checkpoint((fs::path(config.out_dir) / "checkpoint.json").string(), result.model);
    write_text(fs::path(config.out_dir) / "history.csv",
               history_csv(result.history, config.history_timing_ms));
    write_text(fs::path(config.out_dir) / "resolved_config.ini", resolved_config_text(config));

    if (!flags.quiet) {
        std::cout << "trained " << count_params(result.model) << " parameters; epochs run: "
                  << result.history.train_mse.size();
        if (!result.history.val_mse.empty())
            std::cout << "; best val MSE " << result.history.val_mse[result.history.best_epoch]
                      << " at epoch " << result.history.best_epoch;
        std::cout << "\nartifacts in " << config.out_dir << "\n";
    }
    return 0;
}

nlohmann::json report_row(std::size_t horizon, double mse, double mae_v,
                          const std::string& variant, std::size_t M) {
    return {{"horizon", horizon}, {"mse", mse}, {"mae", mae_v}, {"variant", variant}, {"M", M}};
}

void write_report(const fs::path& dir, const std::string& stem, const nlohmann::json& rows) {
    fs::create_directories(dir);
    std::ostringstream csv;
    csv << "horizon,mse,mae,variant,M\n";
    for (const auto& row : rows)
        csv << row["horizon"].get<std::size_t>() << "," << fmt17(row["mse"].get<double>()) << ","
            << fmt17(row["mae"].get<double>()) << "," << row["variant"].get<std::string>() << ","
            << row["M"].get<std::size_t>() << "\n";
    write_text(dir / (stem + ".csv"), csv.str());
    write_text(dir / (stem + ".json"), rows.dump(2) + "\n");
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& config_path,
                 const CommonFlags& flags) {
    if (!fs::exists(checkpoint_path))
        fail(ErrorCode::MissingArtifact, "checkpoint not found: " + checkpoint_path);
    RunConfig config = load_config(config_path, flags);
    const PreparedData data = prepare_data(config);
    LemoleModel model = load_checkpoint(checkpoint_path);
    auto provider = make_provider(config);

    EvalOptions options;
    options.stride = config.eval_stride;
    options.threads = flags.threads;
    if (config.raw_metrics) options.raw_scale_stats = data.stats;
    const EvalResult result = evaluate(model, data.test, *provider, data.meta, options);

    nlohmann::json rows = nlohmann::json::array();
    rows.push_back(report_row(result.standardized.horizon, result.standardized.mse,
                              result.standardized.mae, "full", model.hyper.M));
    if (result.raw)
        rows.push_back(
            report_row(result.raw->horizon, result.raw->mse, result.raw->mae, "full_raw",
                       model.hyper.M));
    write_report(config.out_dir, "evaluate", rows);
    if (!flags.quiet)
        std::cout << "H=" << result.standardized.horizon << " mse=" << result.standardized.mse
                  << " mae=" << result.standardized.mae << " windows="
                  << result.standardized.n_windows << "\n";
    return 0;
}

int cmd_ablate(const std::string& config_path, const CommonFlags& flags) {
    RunConfig config = load_config(config_path, flags);
    const PreparedData data = prepare_data(config);
    auto provider = make_provider(config);

    const auto rows = ablate(config.train, data.train, data.val, data.test, *provider, data.meta,
                             config.eval_stride);
    nlohmann::json out = nlohmann::json::array();
    for (const auto& row : rows) {
        auto j = report_row(config.train.H, row.mse, row.mae, row.variant, config.train.M);
        j["degradation_pct"] = row.degradation_pct;
        j["params"] = row.params;
        out.push_back(j);
    }
    write_report(config.out_dir, "ablate", out);
    if (!flags.quiet)
        for (const auto& row : rows)
            std::cout << row.variant << " mse=" << row.mse << " (" << row.degradation_pct
                      << "%)\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& experts_csv,
              const CommonFlags& flags) {
    RunConfig config = load_config(config_path, flags);
    const PreparedData data = prepare_data(config);
    auto provider = make_provider(config);

    std::vector<std::size_t> m_values;
    std::stringstream ss(experts_csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) m_values.push_back(static_cast<std::size_t>(std::stoull(item)));
    if (m_values.empty()) fail(ErrorCode::ConfigError, "--experts lists no M values");

    const auto rows = expert_sweep(config.train, data.train, data.val, data.test, *provider,
                                   data.meta, m_values, config.eval_stride);
    nlohmann::json out = nlohmann::json::array();
    for (const auto& row : rows) {
        auto j = report_row(config.train.H, row.mse, row.mae, "M" + std::to_string(row.M), row.M);
        j["params"] = row.params;
        out.push_back(j);
    }
    write_report(config.out_dir, "sweep", out);
    if (!flags.quiet)
        for (const auto& row : rows)
            std::cout << "M=" << row.M << " mse=" << row.mse << " mae=" << row.mae
                      << " params=" << row.params << "\n";
    return 0;
}

std::vector<double> read_csv_column(const std::string& path, const std::string& column) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::MissingArtifact, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) fail(ErrorCode::EmptyFile, path + " has no header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    std::size_t col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == column) col = i;
    if (col == header.size()) fail(ErrorCode::MissingColumn, "column '" + column + "' not found");
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t i = 0;
        while (std::getline(ss, cell, ',')) {
            if (i++ == col) {
                char* end = nullptr;
                const double v = std::strtod(cell.c_str(), &end);
                if (cell.empty() || end != cell.c_str() + cell.size())
                    fail(ErrorCode::NonNumericCell, "non-numeric cell '" + cell + "'");
                values.push_back(v);
            }
        }
    }
    return values;
}

int cmd_adf(const std::string& csv_path, const std::string& column, long long max_lag,
            const CommonFlags& flags) {
    const auto series = read_csv_column(csv_path, column);
    std::optional<std::size_t> lag;
    if (max_lag >= 0) lag = static_cast<std::size_t>(max_lag);
    const AdfResult result = adf_statistic(series, lag);
    std::cout << "ADF statistic = " << result.statistic << " (lag order " << result.lag_order
              << "), p-bucket " << to_string(result.p_bucket) << "\n";
    if (!flags.out_dir.empty()) {
        fs::create_directories(flags.out_dir);
        nlohmann::json j = {{"statistic", result.statistic},
                            {"lag_order", result.lag_order},
                            {"p_bucket", to_string(result.p_bucket)},
                            {"n", series.size()},
                            {"column", column}};
        write_text(fs::path(flags.out_dir) / "adf.json", j.dump(2) + "\n");
        write_text(fs::path(flags.out_dir) / "adf.csv",
                   "statistic,lag_order,p_bucket,n\n" + fmt17(result.statistic) + "," +
                       std::to_string(result.lag_order) + "," + to_string(result.p_bucket) + "," +
                       std::to_string(series.size()) + "\n");
    }
    return 0;
}

int cmd_bench(const std::string& checkpoint_path, std::size_t batch, std::size_t reps,
              const CommonFlags& flags) {
    if (!fs::exists(checkpoint_path))
        fail(ErrorCode::MissingArtifact, "checkpoint not found: " + checkpoint_path);
    LemoleModel model = load_checkpoint(checkpoint_path);

    Rng rng(20240901);
    GradCheckSample sample;
    sample.lookback = Matrix(model.hyper.T, model.hyper.C);
    sample.target = Matrix(model.hyper.H, model.hyper.C);
    for (double& v : sample.lookback.storage()) v = rng.normal();
    for (double& v : sample.target.storage()) v = rng.normal();
    if (model.has_static) {
        sample.Z_S = Matrix(model.hyper.L_S, model.hyper.d_llm);
        for (double& v : sample.Z_S.storage()) v = rng.normal();
    }
    if (model.has_dynamic) {
        sample.Z_D = Matrix(model.hyper.L_D, model.hyper.d_llm);
        for (double& v : sample.Z_D.storage()) v = rng.normal();
    }

    TrainConfig config;
    const BenchReport report = bench(model, sample, batch, reps, config);
    std::cout << "params=" << report.params << " train_ms_per_step=" << report.train_ms_per_step
              << " infer_ms_per_window=" << report.infer_ms_per_window << "\n";
    if (!flags.out_dir.empty()) {
        fs::create_directories(flags.out_dir);
        nlohmann::json j = {{"params", report.params},
                            {"train_ms_per_step", report.train_ms_per_step},
                            {"infer_ms_per_window", report.infer_ms_per_window},
                            {"batch", report.batch},
                            {"reps", report.reps}};
        write_text(fs::path(flags.out_dir) / "bench.json", j.dump(2) + "\n");
        write_text(fs::path(flags.out_dir) / "bench.csv",
                   "params,train_ms_per_step,infer_ms_per_window,batch,reps\n" +
                       std::to_string(report.params) + "," + fmt17(report.train_ms_per_step) +
                       "," + fmt17(report.infer_ms_per_window) + "," +
                       std::to_string(report.batch) + "," + std::to_string(report.reps) + "\n");
    }
    return 0;
}

int cmd_synth(const std::string& out_path, const SyntheticSpec& spec, const CommonFlags& flags) {
    const SeriesFrame frame = make_synthetic(spec);
    write_csv(frame, out_path);
    if (!flags.quiet)
        std::cout << "wrote " << frame.rows() << " rows x " << frame.channels() << " channels to "
                  << out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"LeMoLE: LLM-enhanced mixture of linear experts for time series forecasting"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string config_path, checkpoint_path, csv_path, column;
    std::string experts_csv = "1,2,3,4,5";
    long long max_lag = -1;
    std::size_t batch = 32, reps = 20;
    SyntheticSpec synth_spec;
    std::string synth_out = "synth.csv";

    auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
    train_cmd->add_option("config", config_path, "Run config file")->required();
    add_common(train_cmd, flags);

    auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test split");
    eval_cmd->add_option("checkpoint", checkpoint_path, "Checkpoint JSON")->required();
    eval_cmd->add_option("config", config_path, "Run config file")->required();
    add_common(eval_cmd, flags);

    auto* ablate_cmd = app.add_subcommand("ablate", "Train prompt-ablation variants");
    ablate_cmd->add_option("config", config_path, "Run config file")->required();
    add_common(ablate_cmd, flags);

    auto* sweep_cmd = app.add_subcommand("sweep", "Sweep the number of experts");
    sweep_cmd->add_option("config", config_path, "Run config file")->required();
    sweep_cmd->add_option("--experts", experts_csv, "Comma-separated M values");
    add_common(sweep_cmd, flags);

    auto* adf_cmd = app.add_subcommand("adf", "Augmented Dickey-Fuller statistic for a CSV column");
    adf_cmd->add_option("csv", csv_path, "CSV file")->required();
    adf_cmd->add_option("column", column, "Column name")->required();
    adf_cmd->add_option("--max-lag", max_lag, "Fix the lag order (default: Schwert rule)");
    add_common(adf_cmd, flags);

    auto* bench_cmd = app.add_subcommand("bench", "Measure parameter count and step timings");
    bench_cmd->add_option("checkpoint", checkpoint_path, "Checkpoint JSON")->required();
    bench_cmd->add_option("--batch", batch, "Batch size for the training step");
    bench_cmd->add_option("--reps", reps, "Timing repetitions (>= 10)");
    add_common(bench_cmd, flags);

    auto* synth_cmd = app.add_subcommand("synth", "Write a bundled synthetic dataset CSV");
    synth_cmd->add_option("--out", synth_out, "Output CSV path")->required();
    synth_cmd->add_option("--rows", synth_spec.rows, "Row count");
    synth_cmd->add_option("--channels", synth_spec.channels, "Channel count");
    synth_cmd->add_option("--period", synth_spec.period, "Primary cycle length in steps");
    synth_cmd->add_option("--amplitude", synth_spec.amplitude, "Primary cycle amplitude");
    synth_cmd->add_option("--period2", synth_spec.period2, "Secondary cycle length");
    synth_cmd->add_option("--amplitude2", synth_spec.amplitude2, "Secondary cycle amplitude");
    synth_cmd->add_option("--trend", synth_spec.trend_per_step, "Linear trend per step");
    synth_cmd->add_option("--noise", synth_spec.noise_sigma, "Gaussian noise sigma");
    synth_cmd->add_option("--synth-seed", synth_spec.seed, "Generator seed");
    synth_cmd->add_flag("--walk", synth_spec.random_walk, "Emit a random walk (unit-root fixture)");
    add_common(synth_cmd, flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return cmd_train(config_path, flags);
        if (eval_cmd->parsed()) return cmd_evaluate(checkpoint_path, config_path, flags);
        if (ablate_cmd->parsed()) return cmd_ablate(config_path, flags);
        if (sweep_cmd->parsed()) return cmd_sweep(config_path, experts_csv, flags);
        if (adf_cmd->parsed()) return cmd_adf(csv_path, column, max_lag, flags);
        if (bench_cmd->parsed()) return cmd_bench(checkpoint_path, batch, reps, flags);
        if (synth_cmd->parsed()) return cmd_synth(synth_out, synth_spec, flags);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::InvalidArgument ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
