#include "nilm/timeseries.hpp"

#include <cmath>

namespace nilm {

void TimeSeries::validate() const {
    if (interval <= 0) throw ConfigError("TimeSeries: interval must be positive");
    if (values.empty()) throw ConfigError("TimeSeries: length must be >= 1");
    if (!missing.empty() && missing.size() != values.size())
        throw ConfigError("TimeSeries: missing mask length mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]))
            throw NumericError("TimeSeries: non-finite value at index " + std::to_string(i));
        if (values[i] < 0.0)
            throw ConfigError("TimeSeries: negative power at index " + std::to_string(i));
    }
}

void ApplianceProfile::validate() const {
    if (window_length < 3 || window_length % 2 == 0)
        throw ConfigError("profile '" + name + "': window length must be odd and >= 3");
    if (norm_std <= 0.0) throw ConfigError("profile '" + name + "': norm std must be > 0");
    if (!(on_threshold < max_power))
        throw ConfigError("profile '" + name + "': on threshold must be below max power");
}

void AlignedPair::validate() const {
    if (mains.start_epoch != appliance.start_epoch || mains.interval != appliance.interval ||
        mains.length() != appliance.length())
        throw AlignmentError("AlignedPair: series are not on the same grid");
}

TimeSeries subseries(const TimeSeries& series, std::size_t begin, std::size_t count) {
    if (count < 1 || begin + count > series.length())
        throw ConfigError("subseries: range [" + std::to_string(begin) + ", " +
                          std::to_string(begin + count) + ") exceeds length " +
                          std::to_string(series.length()));
    TimeSeries out;
    out.start_epoch = series.time_at(begin);
    out.interval = series.interval;
    out.values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(begin),
                      series.values.begin() + static_cast<std::ptrdiff_t>(begin + count));
    if (!series.missing.empty())
        out.missing.assign(series.missing.begin() + static_cast<std::ptrdiff_t>(begin),
                           series.missing.begin() + static_cast<std::ptrdiff_t>(begin + count));
    return out;
}

AlignedPair subpair(const AlignedPair& pair, std::size_t begin, std::size_t count) {
    return {subseries(pair.mains, begin, count), subseries(pair.appliance, begin, count)};
}

}  // namespace nilm
