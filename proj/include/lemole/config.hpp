#ifndef LEMOLE_CONFIG_HPP
#define LEMOLE_CONFIG_HPP

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lemole/eval.hpp"
#include "lemole/prompts.hpp"
#include "lemole/synthetic.hpp"
#include "lemole/training.hpp"

namespace lemole {

enum class ProviderKind { Hash, File, Remote };
enum class ChannelSelect { All, Last, Index };

/// Fully resolved run configuration. Sourced from an INI-style file
/// ([section] headers, key = value lines, '#' comments); unknown keys are
/// rejected with their line number.
struct RunConfig {
    // [data]
    std::string data_path;
    std::string timestamp_column = "date";
    std::int64_t freq_seconds = 3600;
    SplitSpec split;
    ChannelSelect channel_select = ChannelSelect::Last;
    std::size_t channel_index = 0;
    double few_shot_fraction = 1.0;

    // [dataset]
    DatasetMeta meta;

    // [model] + [train]
    TrainConfig train;

    // [provider]
    ProviderKind provider_kind = ProviderKind::Hash;
    std::uint64_t provider_seed = 0;
    std::string provider_path;
    std::string provider_endpoint;

    // [eval]
    std::size_t eval_stride = 1;
    bool raw_metrics = false;

    // [output]
    std::string out_dir = "runs/out";
    bool history_timing_ms = false;

    // [synthetic] - used when data_path is empty
    std::optional<SyntheticSpec> synthetic;

    std::map<std::string, std::string> resolved; // flat "section.key" -> value
};

RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_text(const std::string& text, const std::string& origin);

/// Apply a "section.key=value" override (CLI flags beat file keys).
void apply_override(RunConfig& config, const std::string& dotted_key, const std::string& value);

/// Serialize the resolved key-value view, suitable for byte-identical
/// reproduction of the run.
std::string resolved_config_text(const RunConfig& config);

std::shared_ptr<EmbeddingProvider> make_provider(const RunConfig& config);

/// Load (or synthesize) the dataset named by the config and apply channel
/// selection.
SeriesFrame load_config_dataset(const RunConfig& config);

/// Meta defaults: channel descriptions fall back to the channel names.
DatasetMeta effective_meta(const RunConfig& config, const SeriesFrame& frame);

} // namespace lemole

#endif // LEMOLE_CONFIG_HPP
