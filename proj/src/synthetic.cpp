#include "lemole/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "lemole/errors.hpp"
#include "lemole/prompts.hpp"
#include "lemole/rng.hpp"

namespace lemole {

std::vector<double> regime_pattern(const std::string& regime_text, std::size_t regime_period) {
    if (regime_period == 0) fail(ErrorCode::InvalidArgument, "regime_period must be >= 1");
    // Mean token embedding of the regime text, re-scaled to unit max-abs: the
    // pattern is a pure function of the text.
    const Matrix tokens = hash_encoder(regime_text, regime_period, 0x7e61e5eedULL);
    std::vector<double> pattern(regime_period, 0.0);
    for (std::size_t t = 0; t < tokens.rows(); ++t)
        for (std::size_t j = 0; j < regime_period; ++j) pattern[j] += tokens(t, j);
    double max_abs = 0.0;
    for (double v : pattern) max_abs = std::max(max_abs, std::fabs(v));
    if (max_abs == 0.0) max_abs = 1.0;
    for (double& v : pattern) v /= max_abs;
    return pattern;
}

SeriesFrame make_synthetic(const SyntheticSpec& spec) {
    if (spec.rows == 0 || spec.channels == 0)
        fail(ErrorCode::InvalidArgument, "synthetic spec needs rows and channels");
    if (spec.period <= 0.0) fail(ErrorCode::InvalidArgument, "period must be positive");

    std::vector<double> pattern;
    if (!spec.regime_text.empty() && spec.regime_strength != 0.0)
        pattern = regime_pattern(spec.regime_text, spec.regime_period ? spec.regime_period
                                                                      : static_cast<std::size_t>(spec.period));

    SeriesFrame frame;
    frame.freq_seconds = spec.freq_seconds;
    frame.timestamps.reserve(spec.rows);
    frame.values = Matrix(spec.rows, spec.channels);
    for (std::size_t c = 0; c < spec.channels; ++c)
        frame.channel_names.push_back("y" + std::to_string(c));

    Rng rng(spec.seed);
    constexpr double two_pi = 2.0 * 3.14159265358979323846;
    std::vector<double> walk_level(spec.channels, 0.0);
    for (std::size_t t = 0; t < spec.rows; ++t) {
        frame.timestamps.push_back(spec.start_epoch +
                                   static_cast<std::int64_t>(t) * spec.freq_seconds);
        for (std::size_t c = 0; c < spec.channels; ++c) {
            if (spec.random_walk) {
                walk_level[c] += (spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0) * rng.normal();
                frame.values(t, c) =
                    walk_level[c] + spec.trend_per_step * static_cast<double>(t);
                continue;
            }
            const double phase_shift = static_cast<double>(c) * 0.5;
            double base = spec.amplitude * std::sin(two_pi * static_cast<double>(t) / spec.period +
                                                    phase_shift);
            if (!pattern.empty())
                base *= 1.0 + spec.regime_strength * pattern[t % pattern.size()];
            if (spec.period2 > 0.0)
                base += spec.amplitude2 *
                        std::sin(two_pi * static_cast<double>(t) / spec.period2 + phase_shift);
            base += spec.trend_per_step * static_cast<double>(t);
            if (spec.noise_sigma > 0.0) base += spec.noise_sigma * rng.normal();
            frame.values(t, c) = base;
        }
    }
    return frame;
}

void write_csv(const SeriesFrame& frame, const std::string& path,
               const std::string& timestamp_column) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::MissingArtifact, "cannot write " + path);
    out << timestamp_column;
    for (const auto& name : frame.channel_names) out << "," << name;
    out << "\n";
    char buf[40];
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        out << format_timestamp(frame.timestamps[r]);
        for (std::size_t c = 0; c < frame.channels(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", frame.values(r, c));
            out << "," << buf;
        }
        out << "\n";
    }
}

} // namespace lemole
