#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nilm/common.hpp"

namespace nilm {

// Uniformly sampled power channel. Gaps are explicit markers, never NaN:
// a marked sample holds 0.0 and missing[i] == 1.
struct TimeSeries {
    std::int64_t start_epoch = 0;  // seconds
    std::int64_t interval = 1;     // seconds, > 0
    std::vector<double> values;    // Watts, >= 0
    std::vector<std::uint8_t> missing;  // empty means "no gaps anywhere"

    std::size_t length() const { return values.size(); }

    std::int64_t time_at(std::size_t i) const {
        return start_epoch + static_cast<std::int64_t>(i) * interval;
    }
    std::int64_t end_epoch() const {
        return values.empty() ? start_epoch : time_at(values.size() - 1);
    }

    bool is_missing(std::size_t i) const { return !missing.empty() && missing[i] != 0; }

    bool has_gaps() const {
        for (std::uint8_t m : missing)
            if (m) return true;
        return false;
    }

    void validate() const;  // interval > 0, length >= 1, values >= 0, no NaN
};

// Per-appliance constants: window length, power bounds and the normalization
// pair used for targets.
struct ApplianceProfile {
    std::string name;
    int window_length = 599;  // W, odd
    double max_power = 0.0;   // Watts
    double on_threshold = 0.0;
    double norm_mean = 0.0;
    double norm_std = 1.0;

    void validate() const;  // W odd >= 3, std > 0, threshold < max
};

// Mains and appliance readings on one shared grid.
struct AlignedPair {
    TimeSeries mains;
    TimeSeries appliance;

    std::size_t length() const { return mains.length(); }
    void validate() const;  // equal start, interval and length
};

// Normalization constants for a channel (z = (x - mean) / std).
struct NormStats {
    double mean = 0.0;
    double std = 1.0;
};

// Copy of samples [begin, begin + count) with timestamps preserved.
TimeSeries subseries(const TimeSeries& series, std::size_t begin, std::size_t count);
AlignedPair subpair(const AlignedPair& pair, std::size_t begin, std::size_t count);

}  // namespace nilm
