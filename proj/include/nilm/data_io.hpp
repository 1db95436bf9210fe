#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nilm/tensor.hpp"
#include "nilm/timeseries.hpp"

namespace nilm {

// Line format of a channel file: one reading per line,
// epoch_seconds<delimiter>watts (column order configurable).
struct ChannelFormat {
    char delimiter = ',';     // ',' or '\t' in practice
    bool time_first = true;   // false: watts<delim>epoch_seconds
};

enum class NegativePolicy {
    reject,   // default: a negative reading is an ingestion error
    clamp,    // clamp negatives to 0
};

// Reads a channel file onto the grid implied by the first timestamp and the
// declared interval. Timestamps must be strictly increasing; skipped grid
// points become missing markers. Throws IngestionError with the offending
// line number on malformed input.
TimeSeries load_channel(const std::string& path, const ChannelFormat& format,
                        std::int64_t interval,
                        NegativePolicy negatives = NegativePolicy::reject);

// Writes `epoch<delim>watts` lines; missing samples are skipped on write.
void save_channel(const TimeSeries& series, const std::string& path,
                  const ChannelFormat& format = {});

// Resamples both series onto a common grid at `interval` over their temporal
// overlap (nearest source sample per grid point). Gaps up to gap_limit
// seconds are forward-filled; longer appliance gaps become 0, longer mains
// gaps stay marked missing so downstream windowing can refuse them.
AlignedPair align_resample(const TimeSeries& mains, const TimeSeries& appliance,
                           std::int64_t interval, std::int64_t gap_limit_seconds = 30);

// z = (x - mean) / std applied elementwise. std must be > 0.
Tensor standardize(const TimeSeries& series, const NormStats& stats);
std::vector<double> standardize(const std::vector<double>& values, const NormStats& stats);

// Exact inverse of standardize (no clamping here; prediction paths clamp).
TimeSeries destandardize(const Tensor& tensor, const NormStats& stats,
                         std::int64_t start_epoch, std::int64_t interval);

// Mean/std over a training mains channel, stored with checkpoints.
NormStats compute_stats(const TimeSeries& series);

// Profile file: JSON with the six ApplianceProfile fields per appliance.
std::vector<ApplianceProfile> load_profiles(const std::string& path);
void save_profiles(const std::vector<ApplianceProfile>& profiles, const std::string& path);

// Built-in defaults for the five standard appliances.
std::vector<ApplianceProfile> default_profiles();

// Looks up a profile by name (case-sensitive). Throws ConfigError if absent.
ApplianceProfile find_profile(const std::vector<ApplianceProfile>& profiles,
                              const std::string& name);

}  // namespace nilm
