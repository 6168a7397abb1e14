#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "lemole/errors.hpp"
#include "lemole/prompts.hpp"

using namespace lemole;
namespace fs = std::filesystem;

namespace {

DatasetMeta ett_style_meta() {
    DatasetMeta meta;
    meta.name = "ETTh1";
    meta.description =
        "Electricity transformer temperature readings collected hourly from a county in China "
        "between July 2016 and July 2018.";
    meta.channels = {{"HUFL", "high useful load"},   {"HULL", "high useless load"},
                     {"MUFL", "middle useful load"}, {"MULL", "middle useless load"},
                     {"LUFL", "low useful load"},    {"LULL", "low useless load"},
                     {"OT", "oil temperature"}};
    return meta;
}

} // namespace

TEST_CASE("static prompt carries the description and every variable") {
    const auto prompt = render_static_prompt(ett_style_meta());
    CHECK(prompt.kind == PromptKind::Static);
    CHECK(prompt.text.find("Dataset: ETTh1") != std::string::npos);
    CHECK(prompt.text.find("transformer temperature") != std::string::npos);
    for (const auto& [name, meaning] : ett_style_meta().channels) {
        CHECK(prompt.text.find(name) != std::string::npos);
        CHECK(prompt.text.find(meaning) != std::string::npos);
    }
    // determinism
    CHECK(render_static_prompt(ett_style_meta()).text == prompt.text);
}

TEST_CASE("single-channel static prompt") {
    DatasetMeta meta;
    meta.name = "sensor";
    meta.description = "A single stream.";
    meta.channels = {{"value", "sensor reading"}};
    const auto prompt = render_static_prompt(meta);
    CHECK(prompt.text.find("value (sensor reading).") != std::string::npos);
}

TEST_CASE("dynamic prompt names both endpoints and the forecast start") {
    std::vector<std::int64_t> stamps;
    for (int h = 0; h <= 7; ++h) stamps.push_back(1467331200 + h * 3600);
    const auto prompt = render_dynamic_prompt(stamps, 3600);
    CHECK(prompt.kind == PromptKind::Dynamic);
    CHECK(prompt.text.find("2016-07-01T00:00:00Z") != std::string::npos);
    CHECK(prompt.text.find("2016-07-01T07:00:00Z") != std::string::npos);
    CHECK(prompt.text.find("every 3600 seconds") != std::string::npos);
    CHECK(prompt.text.find("2016-07-01T08:00:00Z") != std::string::npos);
}

TEST_CASE("single timestamp degenerates to start == end") {
    const auto prompt = render_dynamic_prompt({1467331200}, 3600);
    CHECK(prompt.text.find("spans 2016-07-01T00:00:00Z to 2016-07-01T00:00:00Z") !=
          std::string::npos);
    CHECK_THROWS_AS(static_cast<void>(render_dynamic_prompt({}, 3600)), Error);
}

TEST_CASE("shifted windows render the same token structure") {
    std::vector<std::int64_t> a, b;
    for (int h = 0; h < 24; ++h) {
        a.push_back(1467331200 + h * 3600);
        b.push_back(1467331200 + (h + 1) * 3600);
    }
    const auto ta = render_dynamic_prompt(a, 3600).text;
    const auto tb = render_dynamic_prompt(b, 3600).text;
    CHECK(ta != tb);
    CHECK(tokenize_prompt(ta).size() == tokenize_prompt(tb).size());
}

TEST_CASE("tokenizer lowercases and keeps punctuation") {
    const auto tokens = tokenize_prompt("Hello, World! x2");
    REQUIRE(tokens.size() == 5);
    CHECK(tokens[0] == "hello");
    CHECK(tokens[1] == ",");
    CHECK(tokens[2] == "world");
    CHECK(tokens[3] == "!");
    CHECK(tokens[4] == "x2");
}

TEST_CASE("hash encoder basics") {
    const Matrix m = hash_encoder("a b c", 16, 42);
    CHECK(m.rows() == 3);
    CHECK(m.cols() == 16);

    const Matrix twice = hash_encoder("hello hello", 8, 1);
    for (std::size_t j = 0; j < 8; ++j) CHECK(twice(0, j) == twice(1, j));

    for (std::size_t t = 0; t < m.rows(); ++t) {
        double norm = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) norm += m(t, j) * m(t, j);
        CHECK(std::fabs(std::sqrt(norm) - 1.0) < 1e-9);
    }

    const Matrix again = hash_encoder("a b c", 16, 42);
    CHECK(max_abs_diff(m, again) == 0.0);
    const Matrix other_seed = hash_encoder("a b c", 16, 43);
    CHECK(max_abs_diff(m, other_seed) > 0.0);

    CHECK_THROWS_WITH_AS(static_cast<void>(hash_encoder("   ", 16, 0)),
                         doctest::Contains("EmptyText"), Error);
}

TEST_CASE("fnv1a64 hex reference values") {
    // FNV-1a 64-bit test vectors
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hash_hex(0xdeadbeefULL) == "00000000deadbeef");
}

TEST_CASE("hash provider fills the embedding contract") {
    HashProvider provider(16, 9);
    const auto emb = provider.embed({"a b c", PromptKind::Static});
    CHECK(emb.matrix.rows() == 3);
    CHECK(emb.matrix.cols() == 16);
    CHECK(emb.prompt_hash == fnv1a64("a b c"));
    CHECK(all_finite(emb.matrix));
    const auto again = provider.embed({"a b c", PromptKind::Static});
    CHECK(max_abs_diff(emb.matrix, again.matrix) == 0.0);
}

TEST_CASE("embedding file round trip is bit-exact") {
    const fs::path dir =
        fs::temp_directory_path() / ("lemole_prompts_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const std::string manifest = (dir / "embeds.json").string();

    Matrix stored(5, 768);
    std::uint64_t state = 77;
    for (double& v : stored.storage())
        v = static_cast<double>(static_cast<float>(
            static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53 * 2.0 - 1.0));
    write_embedding_file(manifest, {{"the prompt", stored}});

    FileProvider provider(manifest);
    const auto emb = provider.embed({"the prompt", PromptKind::Static});
    CHECK(emb.matrix.rows() == 5);
    CHECK(emb.matrix.cols() == 768);
    CHECK(max_abs_diff(emb.matrix, stored) == 0.0);

    CHECK_THROWS_WITH_AS(
        static_cast<void>(provider.embed({"unknown prompt", PromptKind::Static})),
        doctest::Contains("CacheMiss"), Error);
    fs::remove_all(dir);
}

TEST_CASE("missing manifest raises ProviderUnavailable") {
    CHECK_THROWS_WITH_AS(FileProvider("/nonexistent/path.json"),
                         doctest::Contains("ProviderUnavailable"), Error);
}

TEST_CASE("memoizing provider encodes each distinct prompt once") {
    struct Counting final : EmbeddingProvider {
        int calls = 0;
        PromptEmbedding embed(const PromptText& prompt) override {
            ++calls;
            PromptEmbedding emb;
            emb.matrix = hash_encoder(prompt.text, 4, 0);
            emb.prompt_hash = fnv1a64(prompt.text);
            return emb;
        }
        std::string id() const override { return "counting"; }
    };
    auto counting = std::make_shared<Counting>();
    MemoizingProvider memo(counting);
    memo.embed({"alpha", PromptKind::Dynamic});
    memo.embed({"alpha", PromptKind::Dynamic});
    memo.embed({"beta", PromptKind::Dynamic});
    CHECK(counting->calls == 2);
    CHECK(memo.cache_size() == 2);
}
