#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "lemole/data.hpp"
#include "lemole/errors.hpp"
#include "lemole/rng.hpp"

using namespace lemole;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("lemole_data_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

SeriesFrame toy_frame(std::size_t rows, std::size_t channels = 1, std::int64_t freq = 3600) {
    SeriesFrame frame;
    frame.freq_seconds = freq;
    frame.values = Matrix(rows, channels);
    for (std::size_t c = 0; c < channels; ++c)
        frame.channel_names.push_back("c" + std::to_string(c));
    for (std::size_t r = 0; r < rows; ++r) {
        frame.timestamps.push_back(1467331200 + static_cast<std::int64_t>(r) * freq);
        for (std::size_t c = 0; c < channels; ++c)
            frame.values(r, c) = static_cast<double>(r) + 0.1 * static_cast<double>(c);
    }
    return frame;
}

} // namespace

TEST_CASE("load_csv parses a small hourly file") {
    TempDir dir;
    const auto p = dir.path / "small.csv";
    write_file(p,
               "date,a,b\n"
               "2016-07-01 00:00:00,1.0,10\n"
               "2016-07-01 01:00:00,2.0,20\n"
               "2016-07-01 02:00:00,3.0,30\n"
               "2016-07-01 03:00:00,4.0,40\n");
    const auto frame = load_csv(p.string(), "date", 3600);
    CHECK(frame.rows() == 4);
    CHECK(frame.channels() == 2);
    CHECK(frame.freq_seconds == 3600);
    CHECK(frame.channel_names[0] == "a");
    CHECK(frame.values(3, 1) == doctest::Approx(40.0));
    CHECK(frame.timestamps[1] - frame.timestamps[0] == 3600);
}

TEST_CASE("load_csv accepts epoch timestamps and sorts rows") {
    TempDir dir;
    const auto p = dir.path / "epoch.csv";
    write_file(p,
               "ts,v\n"
               "7200,3\n"
               "0,1\n"
               "3600,2\n");
    const auto frame = load_csv(p.string(), "ts", 3600);
    CHECK(frame.values(0, 0) == doctest::Approx(1.0));
    CHECK(frame.values(2, 0) == doctest::Approx(3.0));
}

TEST_CASE("load_csv error paths") {
    TempDir dir;
    const auto gap = dir.path / "gap.csv";
    write_file(gap,
               "date,a\n"
               "2016-07-01 00:00:00,1\n"
               "2016-07-01 02:00:00,2\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_csv(gap.string(), "date", 3600)),
                         doctest::Contains("NonUniformSampling"), Error);

    const auto missing = dir.path / "missing.csv";
    write_file(missing, "date,a\n2016-07-01 00:00:00,1\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_csv(missing.string(), "when", 3600)),
                         doctest::Contains("MissingColumn"), Error);

    const auto bad = dir.path / "bad.csv";
    write_file(bad, "date,a\n2016-07-01 00:00:00,oops\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_csv(bad.string(), "date", 3600)),
                         doctest::Contains("NonNumericCell"), Error);

    const auto empty = dir.path / "empty.csv";
    write_file(empty, "date,a\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_csv(empty.string(), "date", 3600)),
                         doctest::Contains("EmptyFile"), Error);
}

TEST_CASE("timestamp parse and format round trip") {
    CHECK(parse_timestamp("1970-01-01 00:00:00") == 0);
    CHECK(parse_timestamp("2016-07-01T00:00:00Z") == 1467331200);
    CHECK(parse_timestamp("1467331200") == 1467331200);
    CHECK(format_timestamp(1467331200) == "2016-07-01T00:00:00Z");
    CHECK(parse_timestamp(format_timestamp(1467334800)) == 1467334800);
}

TEST_CASE("chrono_split boundary arithmetic") {
    const auto frame = toy_frame(100);
    const auto [train, val, test] = chrono_split(frame, {0.7, 0.1, 0.2});
    CHECK(train.rows() == 70);
    CHECK(val.rows() == 10);
    CHECK(test.rows() == 20);
    CHECK(train.timestamps.back() < val.timestamps.front());
    CHECK(val.timestamps.back() < test.timestamps.front());
}

TEST_CASE("chrono_split on an ETTh1-sized frame") {
    // floor(0.7 * 17544) = 12280, floor(0.1 * 17544) = 1754, remainder 3510.
    const auto frame = toy_frame(17544);
    const auto [train, val, test] = chrono_split(frame, {0.7, 0.1, 0.2});
    CHECK(train.rows() == 12280);
    CHECK(val.rows() == 1754);
    CHECK(test.rows() == 3510);
}

TEST_CASE("chrono_split rejects frames too small to window") {
    const auto frame = toy_frame(10);
    const auto [train, val, test] = chrono_split(frame, {0.7, 0.1, 0.2});
    // Splitting itself works on 10 rows; forming a T+H=20 window cannot.
    CHECK_THROWS_AS(static_cast<void>(make_windows(train, 16, 4, 1)), Error);
}

TEST_CASE("fit_stats uses the population convention") {
    SeriesFrame frame = toy_frame(3);
    frame.values(0, 0) = 1.0;
    frame.values(1, 0) = 2.0;
    frame.values(2, 0) = 3.0;
    const auto stats = fit_stats(frame);
    CHECK(stats.mean[0] == doctest::Approx(2.0));
    CHECK(stats.std[0] == doctest::Approx(0.816496580927726));
    const auto standardized = standardize(frame, stats);
    CHECK(standardized.values(0, 0) == doctest::Approx(-1.224744871391589));
    CHECK(standardized.values(1, 0) == doctest::Approx(0.0));
    CHECK(standardized.values(2, 0) == doctest::Approx(1.224744871391589));
}

TEST_CASE("constant channel is rejected") {
    SeriesFrame frame = toy_frame(5);
    for (std::size_t r = 0; r < 5; ++r) frame.values(r, 0) = 42.0;
    CHECK_THROWS_WITH_AS(static_cast<void>(fit_stats(frame)), doctest::Contains("ZeroVariance"),
                         Error);
}

TEST_CASE("standardize then destandardize is the identity") {
    Rng rng(3);
    SeriesFrame frame = toy_frame(8, 3);
    for (double& v : frame.values.storage()) v = rng.normal() * 5.0 + 2.0;
    const auto stats = fit_stats(frame);
    const auto back = destandardize(standardize(frame.values, stats), stats);
    CHECK(max_abs_diff(back, frame.values) < 1e-10);
}

TEST_CASE("make_windows count formula") {
    CHECK(make_windows(toy_frame(10), 4, 2, 1).size() == 5);
    CHECK(make_windows(toy_frame(6), 4, 2, 1).size() == 1);
    CHECK(make_windows(toy_frame(1000), 512, 96, 1).size() == 393);
    CHECK_THROWS_WITH_AS(static_cast<void>(make_windows(toy_frame(5), 4, 2, 1)),
                         doctest::Contains("FrameTooShort"), Error);
}

TEST_CASE("windows are contiguous and the target follows by one step") {
    const auto frame = toy_frame(30, 2);
    for (std::size_t stride : {1u, 2u, 5u}) {
        const auto windows = make_windows(frame, 6, 3, stride);
        for (const auto& w : windows) {
            CHECK(w.target_timestamps.front() - w.lookback_timestamps.back() ==
                  frame.freq_seconds);
            CHECK(w.lookback.rows() == 6);
            CHECK(w.target.rows() == 3);
            // values are the original rows
            CHECK(w.target(0, 0) == doctest::Approx(w.lookback(5, 0) + 1.0));
        }
    }
}

TEST_CASE("expert_views takes suffixes") {
    const auto frame = toy_frame(8);
    const auto views = expert_views(frame.values, {8, 4, 2});
    REQUIRE(views.size() == 3);
    CHECK(views[0].rows() == 8);
    CHECK(views[1].rows() == 4);
    CHECK(views[2].rows() == 2);
    CHECK(views[2](0, 0) == doctest::Approx(6.0));
    CHECK(views[2](1, 0) == doctest::Approx(7.0));
    // single-expert degenerate case returns the full lookback
    const auto single = expert_views(frame.values, {8});
    CHECK(max_abs_diff(single[0], frame.values) == 0.0);
}

TEST_CASE("expert_views error paths") {
    const auto frame = toy_frame(8);
    CHECK_THROWS_WITH_AS(static_cast<void>(expert_views(frame.values, {4, 8})),
                         doctest::Contains("NonDescendingWindows"), Error);
    CHECK_THROWS_WITH_AS(static_cast<void>(expert_views(frame.values, {16, 4})),
                         doctest::Contains("WindowExceedsLookback"), Error);
}

TEST_CASE("few_shot_subset takes the chronological head") {
    const auto frame = toy_frame(1000);
    const auto subset = few_shot_subset(frame, 0.1);
    CHECK(subset.rows() == 100);
    CHECK(subset.timestamps.front() == frame.timestamps.front());
    CHECK(few_shot_subset(frame, 1.0).rows() == 1000);
    CHECK(few_shot_subset(toy_frame(12280), 0.1).rows() == 1228);
}

TEST_CASE("window_schedule halves down to a floor of 8") {
    CHECK(window_schedule(512, 5) == std::vector<std::size_t>{512, 256, 128, 64, 32});
    CHECK(window_schedule(96, 3) == std::vector<std::size_t>{96, 48, 24});
    CHECK(window_schedule(32, 4) == std::vector<std::size_t>{32, 16, 8, 8});
    CHECK(window_schedule(4, 2) == std::vector<std::size_t>{4, 4});
}

TEST_CASE("select_channel keeps one column") {
    const auto frame = toy_frame(10, 3);
    const auto last = select_channel(frame, 2);
    CHECK(last.channels() == 1);
    CHECK(last.channel_names[0] == "c2");
    CHECK(last.values(4, 0) == doctest::Approx(frame.values(4, 2)));
}
