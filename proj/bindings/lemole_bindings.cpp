#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lemole/checkpoint.hpp"
#include "lemole/config.hpp"
#include "lemole/errors.hpp"
#include "lemole/eval.hpp"
#include "lemole/fft.hpp"
#include "lemole/synthetic.hpp"

namespace py = pybind11;
using namespace lemole;

namespace {

Matrix np_to_mat(const py::array_t<double, py::array::c_style | py::array::forcecast>& array) {
    if (array.ndim() != 2) throw py::value_error("expected a 2-D array");
    Matrix m(static_cast<std::size_t>(array.shape(0)), static_cast<std::size_t>(array.shape(1)));
    std::copy(array.data(), array.data() + array.size(), m.storage().begin());
    return m;
}

py::array_t<double> mat_to_np(const Matrix& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    std::copy(m.storage().begin(), m.storage().end(), out.mutable_data());
    return out;
}

SeriesFrame frame_from_numpy(const py::array_t<double>& values,
                             const std::vector<std::int64_t>& timestamps,
                             const std::vector<std::string>& channel_names,
                             std::int64_t freq_seconds) {
    SeriesFrame frame;
    frame.values = np_to_mat(values);
    frame.timestamps = timestamps;
    frame.channel_names = channel_names;
    frame.freq_seconds = freq_seconds;
    if (frame.timestamps.size() != frame.values.rows())
        throw py::value_error("timestamps and value rows disagree");
    if (frame.channel_names.size() != frame.values.cols())
        throw py::value_error("channel_names and value columns disagree");
    return frame;
}

py::dict history_to_dict(const TrainHistory& history) {
    py::dict out;
    out["train_mse"] = history.train_mse;
    out["val_mse"] = history.val_mse;
    out["epoch_ms"] = history.epoch_ms;
    out["best_epoch"] = history.best_epoch;
    return out;
}

py::dict metric_to_dict(const MetricReport& report) {
    py::dict out;
    out["horizon"] = report.horizon;
    out["mse"] = report.mse;
    out["mae"] = report.mae;
    out["n_windows"] = report.n_windows;
    return out;
}

} // namespace

PYBIND11_MODULE(_lemole, m) {
    m.doc() = "LLM-enhanced mixture of linear experts for time series forecasting";

    py::register_exception<Error>(m, "LemoleError");

    py::class_<SeriesFrame>(m, "SeriesFrame")
        .def(py::init(&frame_from_numpy), py::arg("values"), py::arg("timestamps"),
             py::arg("channel_names"), py::arg("freq_seconds"))
        .def_property_readonly("values", [](const SeriesFrame& f) { return mat_to_np(f.values); })
        .def_readonly("timestamps", &SeriesFrame::timestamps)
        .def_readonly("channel_names", &SeriesFrame::channel_names)
        .def_readonly("freq_seconds", &SeriesFrame::freq_seconds)
        .def_property_readonly("rows", &SeriesFrame::rows)
        .def_property_readonly("channels", &SeriesFrame::channels);

    py::class_<SplitSpec>(m, "SplitSpec")
        .def(py::init<>())
        .def_readwrite("train_fraction", &SplitSpec::train_fraction)
        .def_readwrite("val_fraction", &SplitSpec::val_fraction)
        .def_readwrite("test_fraction", &SplitSpec::test_fraction);

    py::class_<ChannelStats>(m, "ChannelStats")
        .def_readonly("mean", &ChannelStats::mean)
        .def_readonly("std", &ChannelStats::std);

    py::class_<DatasetMeta>(m, "DatasetMeta")
        .def(py::init([](std::string name, std::string description,
                         std::vector<std::pair<std::string, std::string>> channels) {
                 DatasetMeta meta;
                 meta.name = std::move(name);
                 meta.description = std::move(description);
                 meta.channels = std::move(channels);
                 return meta;
             }),
             py::arg("name"), py::arg("description"),
             py::arg("channels") = std::vector<std::pair<std::string, std::string>>{})
        .def_readwrite("name", &DatasetMeta::name)
        .def_readwrite("description", &DatasetMeta::description)
        .def_readwrite("channels", &DatasetMeta::channels);

    py::enum_<ExpertDomain>(m, "ExpertDomain")
        .value("TIME", ExpertDomain::Time)
        .value("FREQUENCY", ExpertDomain::Frequency);

    py::enum_<ConditioningMode>(m, "ConditioningMode")
        .value("AGGREGATE", ConditioningMode::Aggregate)
        .value("PER_EXPERT", ConditioningMode::PerExpert);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("beta1", &TrainConfig::beta1)
        .def_readwrite("beta2", &TrainConfig::beta2)
        .def_readwrite("adam_eps", &TrainConfig::adam_eps)
        .def_readwrite("patience", &TrainConfig::patience)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("T", &TrainConfig::T)
        .def_readwrite("H", &TrainConfig::H)
        .def_readwrite("M", &TrainConfig::M)
        .def_readwrite("window_lengths", &TrainConfig::window_lengths)
        .def_readwrite("mode", &TrainConfig::mode)
        .def_readwrite("domain", &TrainConfig::domain)
        .def_readwrite("d_llm", &TrainConfig::d_llm)
        .def_readwrite("conv_kernel", &TrainConfig::conv_kernel)
        .def_readwrite("freq_init_noise", &TrainConfig::freq_init_noise)
        .def_readwrite("train_stride", &TrainConfig::train_stride)
        .def_readwrite("eval_stride", &TrainConfig::eval_stride)
        .def_readwrite("has_static", &TrainConfig::has_static)
        .def_readwrite("has_dynamic", &TrainConfig::has_dynamic);

    py::class_<SyntheticSpec>(m, "SyntheticSpec")
        .def(py::init<>())
        .def_readwrite("rows", &SyntheticSpec::rows)
        .def_readwrite("freq_seconds", &SyntheticSpec::freq_seconds)
        .def_readwrite("channels", &SyntheticSpec::channels)
        .def_readwrite("period", &SyntheticSpec::period)
        .def_readwrite("amplitude", &SyntheticSpec::amplitude)
        .def_readwrite("period2", &SyntheticSpec::period2)
        .def_readwrite("amplitude2", &SyntheticSpec::amplitude2)
        .def_readwrite("trend_per_step", &SyntheticSpec::trend_per_step)
        .def_readwrite("noise_sigma", &SyntheticSpec::noise_sigma)
        .def_readwrite("seed", &SyntheticSpec::seed)
        .def_readwrite("regime_text", &SyntheticSpec::regime_text)
        .def_readwrite("regime_strength", &SyntheticSpec::regime_strength)
        .def_readwrite("regime_period", &SyntheticSpec::regime_period);

    py::class_<HashProvider, std::shared_ptr<HashProvider>>(m, "HashProvider")
        .def(py::init<std::size_t, std::uint64_t>(), py::arg("d_llm"), py::arg("seed"))
        .def("embed_text", [](HashProvider& p, const std::string& text) {
            return mat_to_np(p.embed({text, PromptKind::Static}).matrix);
        });

    py::class_<LemoleModel>(m, "Model")
        .def_property_readonly("params", [](const LemoleModel& model) { return count_params(model); })
        .def_property_readonly("horizon", [](const LemoleModel& model) { return model.hyper.H; })
        .def_property_readonly("lookback", [](const LemoleModel& model) { return model.hyper.T; })
        .def("forward",
             [](const LemoleModel& model, const py::array_t<double>& lookback,
                const py::array_t<double>& z_s, const py::array_t<double>& z_d) {
                 const Matrix lb = np_to_mat(lookback);
                 const Matrix zs = z_s.size() ? np_to_mat(z_s) : Matrix();
                 const Matrix zd = z_d.size() ? np_to_mat(z_d) : Matrix();
                 return mat_to_np(model_forward(model, lb, zs, zd).y_hat);
             },
             py::arg("lookback"), py::arg("z_static") = py::array_t<double>(),
             py::arg("z_dynamic") = py::array_t<double>());

    m.def("load_csv", &load_csv, py::arg("path"), py::arg("timestamp_column"),
          py::arg("freq_seconds"));
    m.def("chrono_split", &chrono_split, py::arg("frame"), py::arg("spec"));
    m.def("fit_stats", &fit_stats);
    m.def("standardize",
          [](const SeriesFrame& frame, const ChannelStats& stats) {
              return standardize(frame, stats);
          });
    m.def("destandardize",
          [](const py::array_t<double>& values, const ChannelStats& stats) {
              return mat_to_np(destandardize(np_to_mat(values), stats));
          });
    m.def("few_shot_subset", &few_shot_subset, py::arg("train"), py::arg("fraction"));
    m.def("select_channel", &select_channel, py::arg("frame"), py::arg("channel"));
    m.def("window_schedule", &window_schedule, py::arg("max_lookback"), py::arg("num_experts"));
    m.def("window_count", &window_count, py::arg("rows"), py::arg("T"), py::arg("H"),
          py::arg("stride"));
    m.def("make_synthetic", &make_synthetic);
    m.def("write_csv", &write_csv, py::arg("frame"), py::arg("path"),
          py::arg("timestamp_column") = "date");

    m.def("fnv1a64", [](const std::string& text) { return fnv1a64(text); });
    m.def("hash_encoder", [](const std::string& text, std::size_t d_llm, std::uint64_t seed) {
        return mat_to_np(hash_encoder(text, d_llm, seed));
    });
    m.def("render_static_prompt",
          [](const DatasetMeta& meta) { return render_static_prompt(meta).text; });
    m.def("render_dynamic_prompt",
          [](const std::vector<std::int64_t>& ts, std::int64_t freq) {
              return render_dynamic_prompt(ts, freq).text;
          });
    m.def("write_embedding_file",
          [](const std::string& manifest_path,
             const std::vector<std::pair<std::string, py::array_t<double>>>& entries) {
              std::vector<std::pair<std::string, Matrix>> converted;
              converted.reserve(entries.size());
              for (const auto& [text, arr] : entries) converted.emplace_back(text, np_to_mat(arr));
              write_embedding_file(manifest_path, converted);
          },
          py::arg("manifest_path"), py::arg("entries"),
          "Precompute embeddings (e.g. from a real LLM) for the file provider.");

    m.def("rfft", [](const std::vector<double>& x) {
        const auto spec = rfft(x);
        py::array_t<std::complex<double>> out(spec.size());
        std::copy(spec.begin(), spec.end(), out.mutable_data());
        return out;
    });
    m.def("irfft", [](const std::vector<std::complex<double>>& spec, std::size_t n) {
        return irfft(spec, n);
    });

    m.def("train",
          [](const TrainConfig& config, const SeriesFrame& train_frame,
             const SeriesFrame& val_frame, const std::shared_ptr<HashProvider>& provider,
             const DatasetMeta& meta) {
              auto result = train(config, train_frame, val_frame, *provider, meta);
              return py::make_tuple(std::move(result.model), history_to_dict(result.history));
          },
          py::arg("config"), py::arg("train_frame"), py::arg("val_frame"), py::arg("provider"),
          py::arg("meta"));

    m.def("evaluate",
          [](const LemoleModel& model, const SeriesFrame& frame,
             const std::shared_ptr<HashProvider>& provider, const DatasetMeta& meta,
             std::size_t stride) {
              EvalOptions options;
              options.stride = stride;
              return metric_to_dict(evaluate(model, frame, *provider, meta, options).standardized);
          },
          py::arg("model"), py::arg("frame"), py::arg("provider"), py::arg("meta"),
          py::arg("stride") = 1);

    m.def("persistence_metrics",
          [](const SeriesFrame& frame, std::size_t T, std::size_t H, std::size_t stride) {
              return metric_to_dict(persistence_metrics(frame, T, H, stride));
          },
          py::arg("frame"), py::arg("T"), py::arg("H"), py::arg("stride") = 1);

    m.def("adf_statistic",
          [](const std::vector<double>& series, std::optional<std::size_t> max_lag) {
              const auto result = adf_statistic(series, max_lag);
              py::dict out;
              out["statistic"] = result.statistic;
              out["lag_order"] = result.lag_order;
              out["p_bucket"] = to_string(result.p_bucket);
              return out;
          },
          py::arg("series"), py::arg("max_lag") = py::none());

    m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("model"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
    m.def("mse", [](const py::array_t<double>& pred, const py::array_t<double>& target) {
        return mse_loss(np_to_mat(pred), np_to_mat(target)).first;
    });
    m.def("mae", [](const py::array_t<double>& pred, const py::array_t<double>& target) {
        return mae(np_to_mat(pred), np_to_mat(target));
    });
}
