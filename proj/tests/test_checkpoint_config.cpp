#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "lemole/checkpoint.hpp"
#include "lemole/config.hpp"
#include "lemole/errors.hpp"

using namespace lemole;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("lemole_ckpt_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

LemoleModel sample_model(ExpertDomain domain, ConditioningMode mode) {
    ModelConfig config;
    config.hyper = {16, 4, 2, 3, 8, 3, 5, 3};
    config.domain = domain;
    config.mode = mode;
    Rng rng(99);
    return make_model(config, rng);
}

const char* kFullConfig = R"ini(
# example run configuration
[data]
freq_seconds = 3600
train_fraction = 0.7
val_fraction = 0.1
test_fraction = 0.2
channel = last

[dataset]
name = synth
description = Bundled synthetic sinusoid with trend and noise.
var.y0 = primary signal

[synthetic]
rows = 400
period = 24
noise_sigma = 0.1
seed = 7

[model]
T = 24
H = 6
M = 2
domain = time
conditioning_mode = aggregate
conv_kernel = 3
d_llm = 16

[train]
epochs = 3
batch_size = 16
learning_rate = 0.001
patience = 5
seed = 11

[provider]
kind = hash
seed = 5

[eval]
stride = 1
raw_metrics = false

[output]
dir = runs/example
)ini";

} // namespace

TEST_CASE("checkpoints round-trip bit-exactly") {
    TempDir dir;
    for (ExpertDomain domain : {ExpertDomain::Time, ExpertDomain::Frequency}) {
        for (ConditioningMode mode : {ConditioningMode::Aggregate, ConditioningMode::PerExpert}) {
            LemoleModel model = sample_model(domain, mode);
            const auto path = (dir.path / "model.json").string();
            save_checkpoint(path, model);
            LemoleModel loaded = load_checkpoint(path);

            auto a = param_tensors(model);
            auto b = param_tensors(loaded);
            REQUIRE(a.size() == b.size());
            for (std::size_t t = 0; t < a.size(); ++t) {
                REQUIRE(a[t].name == b[t].name);
                CHECK(*a[t].data == *b[t].data); // exact, not approximate
            }
            CHECK(loaded.bank.window_lengths == model.bank.window_lengths);
            CHECK(loaded.mode == model.mode);
            CHECK(loaded.hyper.conv_kernel == model.hyper.conv_kernel);

            // serialized form is stable, so re-serialization is byte-identical
            CHECK(checkpoint_to_json(model) == checkpoint_to_json(loaded));
        }
    }
}

TEST_CASE("checkpoint loading validates its input") {
    CHECK_THROWS_WITH_AS(static_cast<void>(load_checkpoint("/nonexistent.json")),
                         doctest::Contains("MissingArtifact"), Error);
    CHECK_THROWS_WITH_AS(static_cast<void>(checkpoint_from_json("not json")),
                         doctest::Contains("MalformedResponse"), Error);
    CHECK_THROWS_WITH_AS(static_cast<void>(checkpoint_from_json("{\"format_version\": 99}")),
                         doctest::Contains("MalformedResponse"), Error);
}

TEST_CASE("run config parses every section") {
    const RunConfig config = parse_run_config_text(kFullConfig, "test.ini");
    CHECK(config.freq_seconds == 3600);
    CHECK(config.split.train_fraction == doctest::Approx(0.7));
    CHECK(config.meta.name == "synth");
    CHECK(config.meta.channels.size() == 1);
    CHECK(config.meta.channels[0].first == "y0");
    REQUIRE(config.synthetic.has_value());
    CHECK(config.synthetic->rows == 400);
    CHECK(config.train.T == 24);
    CHECK(config.train.M == 2);
    CHECK(config.train.epochs == 3);
    CHECK(config.train.seed == 11);
    CHECK(config.provider_kind == ProviderKind::Hash);
    CHECK(config.provider_seed == 5);
    CHECK(config.out_dir == "runs/example");
}

TEST_CASE("unknown keys are rejected with their location") {
    const std::string bad = "[train]\nepochs = 3\nlearning_rte = 0.1\n";
    CHECK_THROWS_WITH_AS(static_cast<void>(parse_run_config_text(bad, "bad.ini")),
                         doctest::Contains("learning_rte"), Error);
    try {
        (void)parse_run_config_text(bad, "bad.ini");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("bad.ini:3") != std::string::npos);
        CHECK(e.code() == ErrorCode::ConfigError);
    }
}

TEST_CASE("malformed lines and values are rejected") {
    CHECK_THROWS_AS(static_cast<void>(parse_run_config_text("[train\nepochs = 1\n", "x")), Error);
    CHECK_THROWS_AS(static_cast<void>(parse_run_config_text("epochs = 1\n", "x")), Error);
    CHECK_THROWS_AS(static_cast<void>(parse_run_config_text("[train]\nepochs\n", "x")), Error);
    CHECK_THROWS_AS(
        static_cast<void>(parse_run_config_text("[train]\nepochs = many\n", "x")), Error);
    CHECK_THROWS_AS(
        static_cast<void>(parse_run_config_text("[model]\ndomain = warp\n", "x")), Error);
}

TEST_CASE("overrides beat file keys and land in the resolved view") {
    RunConfig config = parse_run_config_text(kFullConfig, "test.ini");
    apply_override(config, "train.seed", "42");
    apply_override(config, "output.dir", "elsewhere");
    CHECK(config.train.seed == 42);
    CHECK(config.out_dir == "elsewhere");
    CHECK_THROWS_AS(apply_override(config, "train.nope", "1"), Error);

    const std::string resolved = resolved_config_text(config);
    const RunConfig round = parse_run_config_text(resolved, "resolved.ini");
    CHECK(round.train.seed == 42);
    CHECK(round.out_dir == "elsewhere");
    CHECK(resolved_config_text(round) == resolved);
}

TEST_CASE("environment endpoint override") {
    setenv("LEMOLE_EMBED_ENDPOINT", "http://example.test:9/embed", 1);
    const RunConfig config =
        parse_run_config_text("[provider]\nkind = remote\n", "env.ini");
    unsetenv("LEMOLE_EMBED_ENDPOINT");
    CHECK(config.provider_endpoint == "http://example.test:9/embed");
}

TEST_CASE("provider construction per kind") {
    RunConfig config = parse_run_config_text(kFullConfig, "test.ini");
    CHECK(make_provider(config)->id().rfind("hash:", 0) == 0);

    config.provider_kind = ProviderKind::File;
    config.provider_path = "";
    CHECK_THROWS_AS(static_cast<void>(make_provider(config)), Error);

    config.provider_kind = ProviderKind::Remote;
    config.provider_endpoint = "";
    CHECK_THROWS_AS(static_cast<void>(make_provider(config)), Error);
    config.provider_endpoint = "http://127.0.0.1:1/embed";
    CHECK(make_provider(config)->id().rfind("remote:", 0) == 0);
}

TEST_CASE("config dataset loading applies channel selection") {
    RunConfig config = parse_run_config_text(kFullConfig, "test.ini");
    config.synthetic->channels = 3;
    const SeriesFrame frame = load_config_dataset(config);
    CHECK(frame.channels() == 1); // channel = last
    CHECK(frame.channel_names[0] == "y2");

    apply_override(config, "data.channel", "all");
    CHECK(load_config_dataset(config).channels() == 3);
    apply_override(config, "data.channel", "1");
    CHECK(load_config_dataset(config).channel_names[0] == "y1");
}

TEST_CASE("effective_meta fills defaults from the frame") {
    RunConfig config = parse_run_config_text("[synthetic]\nrows = 50\n", "tiny.ini");
    const SeriesFrame frame = load_config_dataset(config);
    const DatasetMeta meta = effective_meta(config, frame);
    CHECK(meta.name == "synthetic");
    CHECK(!meta.description.empty());
    CHECK(meta.channels.size() == frame.channels());
}
