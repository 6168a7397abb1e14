#include "lemole/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lemole/errors.hpp"

namespace lemole {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool known_key(const std::string& section, const std::string& key) {
    static const std::map<std::string, std::vector<std::string>> keys = {
        {"data",
         {"path", "timestamp_column", "freq_seconds", "train_fraction", "val_fraction",
          "test_fraction", "channel", "few_shot_fraction"}},
        {"dataset", {"name", "description"}}, // plus var.<channel>
        {"model",
         {"T", "H", "M", "window_lengths", "domain", "conditioning_mode", "conv_kernel", "d_llm",
          "freq_init_noise", "use_static_prompt", "use_dynamic_prompt"}},
        {"train",
         {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "adam_eps", "patience",
          "seed", "stride"}},
        {"provider", {"kind", "seed", "path", "endpoint"}},
        {"eval", {"stride", "raw_metrics"}},
        {"output", {"dir", "history_timing_ms"}},
        {"synthetic",
         {"rows", "channels", "period", "amplitude", "period2", "amplitude2", "trend_per_step",
          "noise_sigma", "seed", "regime_text", "regime_strength", "regime_period", "start_epoch",
          "random_walk"}},
    };
    const auto it = keys.find(section);
    if (it == keys.end()) return false;
    if (section == "dataset" && key.rfind("var.", 0) == 0) return true;
    return std::find(it->second.begin(), it->second.end(), key) != it->second.end();
}

long long parse_int(const std::string& value, const std::string& where) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        fail(ErrorCode::ConfigError, where + ": expected an integer, got '" + value + "'");
    }
}

double parse_double(const std::string& value, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        fail(ErrorCode::ConfigError, where + ": expected a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& value, const std::string& where) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    fail(ErrorCode::ConfigError, where + ": expected true/false, got '" + value + "'");
}

std::vector<std::size_t> parse_size_list(const std::string& value, const std::string& where) {
    std::vector<std::size_t> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(static_cast<std::size_t>(parse_int(item, where)));
    }
    if (out.empty()) fail(ErrorCode::ConfigError, where + ": empty list");
    return out;
}

void assign(RunConfig& config, const std::string& section, const std::string& key,
            const std::string& value, const std::string& where) {
    const std::string dotted = section + "." + key;
    if (section == "data") {
        if (key == "path") config.data_path = value;
        else if (key == "timestamp_column") config.timestamp_column = value;
        else if (key == "freq_seconds") config.freq_seconds = parse_int(value, where);
        else if (key == "train_fraction") config.split.train_fraction = parse_double(value, where);
        else if (key == "val_fraction") config.split.val_fraction = parse_double(value, where);
        else if (key == "test_fraction") config.split.test_fraction = parse_double(value, where);
        else if (key == "few_shot_fraction") config.few_shot_fraction = parse_double(value, where);
        else if (key == "channel") {
            if (value == "all") config.channel_select = ChannelSelect::All;
            else if (value == "last") config.channel_select = ChannelSelect::Last;
            else {
                config.channel_select = ChannelSelect::Index;
                config.channel_index = static_cast<std::size_t>(parse_int(value, where));
            }
        }
    } else if (section == "dataset") {
        if (key == "name") config.meta.name = value;
        else if (key == "description") config.meta.description = value;
        else if (key.rfind("var.", 0) == 0) config.meta.channels.emplace_back(key.substr(4), value);
    } else if (section == "model") {
        if (key == "T") config.train.T = static_cast<std::size_t>(parse_int(value, where));
        else if (key == "H") config.train.H = static_cast<std::size_t>(parse_int(value, where));
        else if (key == "M") config.train.M = static_cast<std::size_t>(parse_int(value, where));
        else if (key == "window_lengths") config.train.window_lengths = parse_size_list(value, where);
        else if (key == "domain") {
            if (value == "time") config.train.domain = ExpertDomain::Time;
            else if (value == "frequency") config.train.domain = ExpertDomain::Frequency;
            else fail(ErrorCode::ConfigError, where + ": domain must be time|frequency");
        } else if (key == "conditioning_mode") {
            if (value == "aggregate") config.train.mode = ConditioningMode::Aggregate;
            else if (value == "per_expert") config.train.mode = ConditioningMode::PerExpert;
            else fail(ErrorCode::ConfigError, where + ": conditioning_mode must be aggregate|per_expert");
        } else if (key == "conv_kernel") {
            config.train.conv_kernel = static_cast<std::size_t>(parse_int(value, where));
        } else if (key == "d_llm") {
            config.train.d_llm = static_cast<std::size_t>(parse_int(value, where));
        } else if (key == "freq_init_noise") {
            config.train.freq_init_noise = parse_double(value, where);
        } else if (key == "use_static_prompt") {
            config.train.has_static = parse_bool(value, where);
        } else if (key == "use_dynamic_prompt") {
            config.train.has_dynamic = parse_bool(value, where);
        }
    } else if (section == "train") {
        if (key == "epochs") config.train.epochs = static_cast<std::size_t>(parse_int(value, where));
        else if (key == "batch_size") config.train.batch_size = static_cast<std::size_t>(parse_int(value, where));
        else if (key == "learning_rate") config.train.learning_rate = parse_double(value, where);
        else if (key == "beta1") config.train.beta1 = parse_double(value, where);
        else if (key == "beta2") config.train.beta2 = parse_double(value, where);
        else if (key == "adam_eps") config.train.adam_eps = parse_double(value, where);
        else if (key == "patience") config.train.patience = static_cast<std::size_t>(parse_int(value, where));
        else if (key == "seed") config.train.seed = static_cast<std::uint64_t>(parse_int(value, where));
        else if (key == "stride") config.train.train_stride = static_cast<std::size_t>(parse_int(value, where));
    } else if (section == "provider") {
        if (key == "kind") {
            if (value == "hash") config.provider_kind = ProviderKind::Hash;
            else if (value == "file") config.provider_kind = ProviderKind::File;
            else if (value == "remote") config.provider_kind = ProviderKind::Remote;
            else fail(ErrorCode::ConfigError, where + ": provider kind must be hash|file|remote");
        } else if (key == "seed") {
            config.provider_seed = static_cast<std::uint64_t>(parse_int(value, where));
        } else if (key == "path") {
            config.provider_path = value;
        } else if (key == "endpoint") {
            config.provider_endpoint = value;
        }
    } else if (section == "eval") {
        if (key == "stride") config.eval_stride = static_cast<std::size_t>(parse_int(value, where));
        else if (key == "raw_metrics") config.raw_metrics = parse_bool(value, where);
    } else if (section == "output") {
        if (key == "dir") config.out_dir = value;
        else if (key == "history_timing_ms") config.history_timing_ms = parse_bool(value, where);
    } else if (section == "synthetic") {
        if (!config.synthetic) config.synthetic = SyntheticSpec{};
        auto& s = *config.synthetic;
        if (key == "rows") s.rows = static_cast<std::size_t>(parse_int(value, where));
        else if (key == "channels") s.channels = static_cast<std::size_t>(parse_int(value, where));
        else if (key == "period") s.period = parse_double(value, where);
        else if (key == "amplitude") s.amplitude = parse_double(value, where);
        else if (key == "period2") s.period2 = parse_double(value, where);
        else if (key == "amplitude2") s.amplitude2 = parse_double(value, where);
        else if (key == "trend_per_step") s.trend_per_step = parse_double(value, where);
        else if (key == "noise_sigma") s.noise_sigma = parse_double(value, where);
        else if (key == "seed") s.seed = static_cast<std::uint64_t>(parse_int(value, where));
        else if (key == "regime_text") s.regime_text = value;
        else if (key == "regime_strength") s.regime_strength = parse_double(value, where);
        else if (key == "regime_period") s.regime_period = static_cast<std::size_t>(parse_int(value, where));
        else if (key == "start_epoch") s.start_epoch = parse_int(value, where);
        else if (key == "random_walk") s.random_walk = parse_bool(value, where);
    }
    config.resolved[dotted] = value;
}

} // namespace

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = origin + ":" + std::to_string(line_no);
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                fail(ErrorCode::ConfigError, where + ": malformed section header");
            section = trim(stripped.substr(1, stripped.size() - 2));
            if (section.empty()) fail(ErrorCode::ConfigError, where + ": empty section name");
            continue;
        }
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::ConfigError, where + ": expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (section.empty())
            fail(ErrorCode::ConfigError, where + ": key '" + key + "' outside any [section]");
        if (!known_key(section, key))
            fail(ErrorCode::ConfigError, where + ": unknown key '" + section + "." + key + "'");
        assign(config, section, key, value, where);
    }
    if (const char* env = std::getenv("LEMOLE_EMBED_ENDPOINT"); env && *env) {
        config.provider_endpoint = env;
        config.resolved["provider.endpoint"] = env;
    }
    return config;
}

RunConfig parse_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::ConfigError, "cannot open config " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_run_config_text(text, path);
}

void apply_override(RunConfig& config, const std::string& dotted_key, const std::string& value) {
    const auto dot = dotted_key.find('.');
    if (dot == std::string::npos)
        fail(ErrorCode::ConfigError, "override key must look like section.key: " + dotted_key);
    const std::string section = dotted_key.substr(0, dot);
    const std::string key = dotted_key.substr(dot + 1);
    if (!known_key(section, key))
        fail(ErrorCode::ConfigError, "unknown override key '" + dotted_key + "'");
    assign(config, section, key, value, "override:" + dotted_key);
}

std::string resolved_config_text(const RunConfig& config) {
    // Recover sections from the flat map; std::map keeps this deterministic.
    std::ostringstream out;
    std::string current;
    for (const auto& [dotted, value] : config.resolved) {
        const auto dot = dotted.find('.');
        const std::string section = dotted.substr(0, dot);
        const std::string key = dotted.substr(dot + 1);
        if (section != current) {
            if (!current.empty()) out << "\n";
            out << "[" << section << "]\n";
            current = section;
        }
        out << key << " = " << value << "\n";
    }
    return out.str();
}

std::shared_ptr<EmbeddingProvider> make_provider(const RunConfig& config) {
    switch (config.provider_kind) {
        case ProviderKind::Hash:
            return std::make_shared<HashProvider>(config.train.d_llm, config.provider_seed);
        case ProviderKind::File:
            if (config.provider_path.empty())
                fail(ErrorCode::ConfigError, "provider.path is required for kind=file");
            return std::make_shared<FileProvider>(config.provider_path);
        case ProviderKind::Remote:
            if (config.provider_endpoint.empty())
                fail(ErrorCode::ConfigError,
                     "provider.endpoint (or LEMOLE_EMBED_ENDPOINT) is required for kind=remote");
            return std::make_shared<RemoteProvider>(config.provider_endpoint);
    }
    fail(ErrorCode::ConfigError, "unreachable provider kind");
}

SeriesFrame load_config_dataset(const RunConfig& config) {
    SeriesFrame frame;
    if (!config.data_path.empty())
        frame = load_csv(config.data_path, config.timestamp_column, config.freq_seconds);
    else if (config.synthetic)
        frame = make_synthetic(*config.synthetic);
    else
        fail(ErrorCode::ConfigError, "config needs data.path or a [synthetic] section");

    switch (config.channel_select) {
        case ChannelSelect::All: return frame;
        case ChannelSelect::Last: return select_channel(frame, frame.channels() - 1);
        case ChannelSelect::Index: return select_channel(frame, config.channel_index);
    }
    return frame;
}

DatasetMeta effective_meta(const RunConfig& config, const SeriesFrame& frame) {
    DatasetMeta meta = config.meta;
    if (meta.name.empty()) meta.name = config.data_path.empty() ? "synthetic" : config.data_path;
    if (meta.description.empty())
        meta.description = "Uniformly sampled series at " + std::to_string(frame.freq_seconds) +
                           " second intervals with " + std::to_string(frame.channels()) +
                           " channels.";
    if (meta.channels.empty())
        for (const auto& name : frame.channel_names) meta.channels.emplace_back(name, "");
    return meta;
}

} // namespace lemole
