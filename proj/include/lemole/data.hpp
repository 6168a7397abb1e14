#ifndef LEMOLE_DATA_HPP
#define LEMOLE_DATA_HPP

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "lemole/matrix.hpp"

namespace lemole {

/// Multivariate series sampled on a uniform grid. Rows of `values` are time
/// steps, columns are channels.
struct SeriesFrame {
    std::vector<std::int64_t> timestamps; // epoch seconds, strictly increasing
    Matrix values;                        // rows x channels
    std::vector<std::string> channel_names;
    std::int64_t freq_seconds = 0;

    std::size_t rows() const { return timestamps.size(); }
    std::size_t channels() const { return values.cols(); }
};

struct WindowSample {
    Matrix lookback; // T x C
    Matrix target;   // H x C
    std::vector<std::int64_t> lookback_timestamps;
    std::vector<std::int64_t> target_timestamps;
};

struct SplitSpec {
    double train_fraction = 0.7;
    double val_fraction = 0.1;
    double test_fraction = 0.2;
};

struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> std; // population, strictly positive
};

/// Parse "YYYY-MM-DD[ T]HH:MM[:SS][Z]", "YYYY-MM-DD", or a plain epoch-second
/// integer. Returns epoch seconds (UTC).
std::int64_t parse_timestamp(const std::string& text);

/// Render epoch seconds as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_timestamp(std::int64_t epoch_seconds);

/// Load a CSV with one timestamp column and one numeric column per channel.
/// Rows are sorted by time and the stride must equal freq_seconds throughout.
SeriesFrame load_csv(const std::string& path, const std::string& timestamp_column,
                     std::int64_t freq_seconds);

/// Slice a frame into chronological [train, val, test] segments. Boundaries
/// are floor(fraction * rows); remainder rows go to the test segment.
std::tuple<SeriesFrame, SeriesFrame, SeriesFrame> chrono_split(const SeriesFrame& frame,
                                                               const SplitSpec& spec);

ChannelStats fit_stats(const SeriesFrame& train);
SeriesFrame standardize(const SeriesFrame& frame, const ChannelStats& stats);
Matrix standardize(const Matrix& values, const ChannelStats& stats);
Matrix destandardize(const Matrix& values, const ChannelStats& stats);

std::size_t window_count(std::size_t rows, std::size_t T, std::size_t H, std::size_t stride);
std::vector<WindowSample> make_windows(const SeriesFrame& frame, std::size_t T, std::size_t H,
                                       std::size_t stride);

/// Per-expert suffix views of a lookback: view m is the most recent
/// window_lengths[m] rows.
std::vector<Matrix> expert_views(const Matrix& lookback, const std::vector<std::size_t>& window_lengths);

/// Chronological head of the training split (few-shot protocol).
SeriesFrame few_shot_subset(const SeriesFrame& train, double fraction);

/// Keep a single channel of a frame (channel-independence experiments).
SeriesFrame select_channel(const SeriesFrame& frame, std::size_t channel);

/// Descending window lengths w_m = max(floor(w1 / 2^(m-1)), min(8, w1)).
std::vector<std::size_t> window_schedule(std::size_t max_lookback, std::size_t num_experts);

} // namespace lemole

#endif // LEMOLE_DATA_HPP
