#ifndef LEMOLE_SYNTHETIC_HPP
#define LEMOLE_SYNTHETIC_HPP

#include <cstdint>
#include <string>

#include "lemole/data.hpp"

namespace lemole {

/// Bundled dataset generator: seeded sinusoid(s) + linear trend + Gaussian
/// noise. When regime_text is set, a per-phase gain pattern derived from that
/// text's token embeddings modulates the primary cycle, so the regime is
/// recoverable only through the text.
struct SyntheticSpec {
    std::size_t rows = 2000;
    std::int64_t freq_seconds = 3600;
    std::int64_t start_epoch = 1467331200; // 2016-07-01T00:00:00Z
    std::size_t channels = 1;
    double period = 24.0;
    double amplitude = 1.0;
    double period2 = 0.0; // disabled when 0
    double amplitude2 = 0.0;
    double trend_per_step = 0.0;
    double noise_sigma = 0.1;
    std::uint64_t seed = 7;

    std::string regime_text;
    double regime_strength = 0.0;
    std::size_t regime_period = 0;

    // integrate the noise instead of the sinusoid (unit-root fixture)
    bool random_walk = false;
};

SeriesFrame make_synthetic(const SyntheticSpec& spec);

/// The gain pattern used for regime injection (unit max-abs, length
/// regime_period); exposed so tests can reason about it.
std::vector<double> regime_pattern(const std::string& regime_text, std::size_t regime_period);

void write_csv(const SeriesFrame& frame, const std::string& path,
               const std::string& timestamp_column = "date");

} // namespace lemole

#endif // LEMOLE_SYNTHETIC_HPP
