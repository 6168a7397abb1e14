#include "lemole/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace lemole {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date (Howard Hinnant's
// civil-days arithmetic).
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = static_cast<int>(yy + (m <= 2));
}

bool all_digits_or_sign(const std::string& s) {
    if (s.empty()) return false;
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

std::string strip(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') {
            quoted = !quoted;
        } else if (ch == ',' && !quoted) {
            cells.push_back(strip(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    cells.push_back(strip(cur));
    return cells;
}

} // namespace

std::int64_t parse_timestamp(const std::string& raw) {
    const std::string text = strip(raw);
    if (text.empty()) fail(ErrorCode::NonNumericCell, "empty timestamp cell");
    if (all_digits_or_sign(text)) {
        std::int64_t v = 0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec != std::errc{}) fail(ErrorCode::NonNumericCell, "bad epoch timestamp: " + text);
        return v;
    }
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    std::string t = text;
    if (!t.empty() && (t.back() == 'Z' || t.back() == 'z')) t.pop_back();
    std::replace(t.begin(), t.end(), 'T', ' ');
    const int n = std::sscanf(t.c_str(), "%d-%d-%d %d:%d:%d", &y, &mo, &d, &h, &mi, &s);
    if (n != 3 && n != 5 && n != 6)
        fail(ErrorCode::NonNumericCell, "unparseable timestamp: " + text);
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 ||
        s > 60)
        fail(ErrorCode::NonNumericCell, "timestamp out of range: " + text);
    return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

std::string format_timestamp(std::int64_t epoch_seconds) {
    std::int64_t days = epoch_seconds / 86400;
    std::int64_t rem = epoch_seconds % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    int y;
    unsigned mo, d;
    civil_from_days(days, y, mo, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", y, mo, d,
                  static_cast<long long>(rem / 3600), static_cast<long long>((rem / 60) % 60),
                  static_cast<long long>(rem % 60));
    return buf;
}

SeriesFrame load_csv(const std::string& path, const std::string& timestamp_column,
                     std::int64_t freq_seconds) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::EmptyFile, "cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) fail(ErrorCode::EmptyFile, path + " has no header");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto header = split_csv_line(line);
    std::size_t ts_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == timestamp_column) ts_col = i;
    if (ts_col == header.size())
        fail(ErrorCode::MissingColumn, "timestamp column '" + timestamp_column + "' not in " + path);

    std::vector<std::string> channel_names;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (i != ts_col) channel_names.push_back(header[i]);
    if (channel_names.empty()) fail(ErrorCode::MissingColumn, "no value columns in " + path);

    std::vector<std::int64_t> timestamps;
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (strip(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            fail(ErrorCode::NonNumericCell,
                 path + ":" + std::to_string(line_no) + ": expected " +
                     std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
        timestamps.push_back(parse_timestamp(cells[ts_col]));
        std::vector<double> row;
        row.reserve(channel_names.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i == ts_col) continue;
            const std::string& cell = cells[i];
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v))
                fail(ErrorCode::NonNumericCell,
                     path + ":" + std::to_string(line_no) + ": non-numeric cell '" + cell + "'");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) fail(ErrorCode::EmptyFile, path + " has a header but no rows");
    if (freq_seconds <= 0) fail(ErrorCode::InvalidArgument, "freq_seconds must be positive");

    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return timestamps[a] < timestamps[b]; });

    SeriesFrame frame;
    frame.freq_seconds = freq_seconds;
    frame.channel_names = channel_names;
    frame.timestamps.reserve(rows.size());
    frame.values = Matrix(rows.size(), channel_names.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        frame.timestamps.push_back(timestamps[order[r]]);
        for (std::size_t c = 0; c < channel_names.size(); ++c)
            frame.values(r, c) = rows[order[r]][c];
    }
    for (std::size_t r = 1; r < frame.timestamps.size(); ++r) {
        const std::int64_t gap = frame.timestamps[r] - frame.timestamps[r - 1];
        if (gap != freq_seconds)
            fail(ErrorCode::NonUniformSampling,
                 path + ": gap of " + std::to_string(gap) + " s at row " + std::to_string(r + 1) +
                     ", expected " + std::to_string(freq_seconds));
    }
    return frame;
}

namespace {

SeriesFrame slice_frame(const SeriesFrame& frame, std::size_t begin, std::size_t count) {
    SeriesFrame out;
    out.freq_seconds = frame.freq_seconds;
    out.channel_names = frame.channel_names;
    out.timestamps.assign(frame.timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                          frame.timestamps.begin() + static_cast<std::ptrdiff_t>(begin + count));
    out.values = Matrix(count, frame.channels());
    for (std::size_t r = 0; r < count; ++r)
        for (std::size_t c = 0; c < frame.channels(); ++c)
            out.values(r, c) = frame.values(begin + r, c);
    return out;
}

} // namespace

std::tuple<SeriesFrame, SeriesFrame, SeriesFrame> chrono_split(const SeriesFrame& frame,
                                                               const SplitSpec& spec) {
    const double sum = spec.train_fraction + spec.val_fraction + spec.test_fraction;
    if (std::fabs(sum - 1.0) > 1e-9 || spec.train_fraction <= 0 || spec.val_fraction <= 0 ||
        spec.test_fraction <= 0)
        fail(ErrorCode::InvalidArgument, "split fractions must be in (0,1) and sum to 1");
    const std::size_t rows = frame.rows();
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(rows)));
    const auto n_val = static_cast<std::size_t>(std::floor(spec.val_fraction * static_cast<double>(rows)));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= rows)
        fail(ErrorCode::SplitTooSmall, "frame of " + std::to_string(rows) + " rows cannot be split");
    const std::size_t n_test = rows - n_train - n_val;
    return {slice_frame(frame, 0, n_train), slice_frame(frame, n_train, n_val),
            slice_frame(frame, n_train + n_val, n_test)};
}

ChannelStats fit_stats(const SeriesFrame& train) {
    const std::size_t rows = train.rows(), cols = train.channels();
    if (rows == 0) fail(ErrorCode::EmptyFile, "cannot fit stats on an empty frame");
    ChannelStats stats;
    stats.mean.assign(cols, 0.0);
    stats.std.assign(cols, 0.0);
    for (std::size_t c = 0; c < cols; ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < rows; ++r) sum += train.values(r, c);
        const double mean = sum / static_cast<double>(rows);
        double sq = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            const double d = train.values(r, c) - mean;
            sq += d * d;
        }
        const double var = sq / static_cast<double>(rows);
        if (var <= 0.0)
            fail(ErrorCode::ZeroVariance, "channel '" + train.channel_names[c] + "' is constant");
        stats.mean[c] = mean;
        stats.std[c] = std::sqrt(var);
    }
    return stats;
}

Matrix standardize(const Matrix& values, const ChannelStats& stats) {
    if (values.cols() != stats.mean.size())
        fail(ErrorCode::ShapeMismatch, "stats cover a different channel count");
    Matrix out(values.rows(), values.cols());
    for (std::size_t r = 0; r < values.rows(); ++r)
        for (std::size_t c = 0; c < values.cols(); ++c)
            out(r, c) = (values(r, c) - stats.mean[c]) / stats.std[c];
    return out;
}

SeriesFrame standardize(const SeriesFrame& frame, const ChannelStats& stats) {
    SeriesFrame out = frame;
    out.values = standardize(frame.values, stats);
    return out;
}

Matrix destandardize(const Matrix& values, const ChannelStats& stats) {
    if (values.cols() != stats.mean.size())
        fail(ErrorCode::ShapeMismatch, "stats cover a different channel count");
    Matrix out(values.rows(), values.cols());
    for (std::size_t r = 0; r < values.rows(); ++r)
        for (std::size_t c = 0; c < values.cols(); ++c)
            out(r, c) = values(r, c) * stats.std[c] + stats.mean[c];
    return out;
}

std::size_t window_count(std::size_t rows, std::size_t T, std::size_t H, std::size_t stride) {
    if (rows < T + H) return 0;
    return (rows - T - H) / stride + 1;
}

std::vector<WindowSample> make_windows(const SeriesFrame& frame, std::size_t T, std::size_t H,
                                       std::size_t stride) {
    if (T == 0 || H == 0 || stride == 0)
        fail(ErrorCode::InvalidArgument, "T, H and stride must be >= 1");
    const std::size_t rows = frame.rows();
    if (rows < T + H)
        fail(ErrorCode::FrameTooShort, std::to_string(rows) + " rows cannot host T+H=" +
                                           std::to_string(T + H));
    const std::size_t count = window_count(rows, T, H, stride);
    std::vector<WindowSample> out;
    out.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t start = w * stride;
        WindowSample sample;
        sample.lookback = Matrix(T, frame.channels());
        sample.target = Matrix(H, frame.channels());
        sample.lookback_timestamps.assign(frame.timestamps.begin() + static_cast<std::ptrdiff_t>(start),
                                          frame.timestamps.begin() + static_cast<std::ptrdiff_t>(start + T));
        sample.target_timestamps.assign(frame.timestamps.begin() + static_cast<std::ptrdiff_t>(start + T),
                                        frame.timestamps.begin() + static_cast<std::ptrdiff_t>(start + T + H));
        for (std::size_t c = 0; c < frame.channels(); ++c) {
            for (std::size_t r = 0; r < T; ++r) sample.lookback(r, c) = frame.values(start + r, c);
            for (std::size_t r = 0; r < H; ++r) sample.target(r, c) = frame.values(start + T + r, c);
        }
        out.push_back(std::move(sample));
    }
    return out;
}

std::vector<Matrix> expert_views(const Matrix& lookback, const std::vector<std::size_t>& window_lengths) {
    if (window_lengths.empty()) fail(ErrorCode::InvalidArgument, "no window lengths");
    for (std::size_t m = 1; m < window_lengths.size(); ++m)
        if (window_lengths[m] > window_lengths[m - 1])
            fail(ErrorCode::NonDescendingWindows, "window lengths must be non-increasing");
    if (window_lengths.front() > lookback.rows() || window_lengths.back() == 0)
        fail(ErrorCode::WindowExceedsLookback,
             "w_1=" + std::to_string(window_lengths.front()) + " exceeds lookback of " +
                 std::to_string(lookback.rows()));
    std::vector<Matrix> views;
    views.reserve(window_lengths.size());
    for (std::size_t w : window_lengths) {
        Matrix view(w, lookback.cols());
        const std::size_t offset = lookback.rows() - w;
        for (std::size_t r = 0; r < w; ++r)
            for (std::size_t c = 0; c < lookback.cols(); ++c) view(r, c) = lookback(offset + r, c);
        views.push_back(std::move(view));
    }
    return views;
}

SeriesFrame few_shot_subset(const SeriesFrame& train, double fraction) {
    if (fraction <= 0.0 || fraction > 1.0)
        fail(ErrorCode::InvalidArgument, "few-shot fraction must be in (0,1]");
    const auto keep = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(train.rows())));
    if (keep == 0) fail(ErrorCode::SplitTooSmall, "few-shot subset would be empty");
    return slice_frame(train, 0, keep);
}

SeriesFrame select_channel(const SeriesFrame& frame, std::size_t channel) {
    if (channel >= frame.channels()) fail(ErrorCode::MissingColumn, "channel index out of range");
    SeriesFrame out;
    out.freq_seconds = frame.freq_seconds;
    out.timestamps = frame.timestamps;
    out.channel_names = {frame.channel_names[channel]};
    out.values = Matrix(frame.rows(), 1);
    for (std::size_t r = 0; r < frame.rows(); ++r) out.values(r, 0) = frame.values(r, channel);
    return out;
}

std::vector<std::size_t> window_schedule(std::size_t max_lookback, std::size_t num_experts) {
    if (max_lookback == 0 || num_experts == 0)
        fail(ErrorCode::InvalidArgument, "window schedule needs positive sizes");
    const std::size_t floor_len = std::min<std::size_t>(8, max_lookback);
    std::vector<std::size_t> lengths;
    lengths.reserve(num_experts);
    for (std::size_t m = 0; m < num_experts; ++m)
        lengths.push_back(std::max(max_lookback >> m, floor_len));
    return lengths;
}

} // namespace lemole
