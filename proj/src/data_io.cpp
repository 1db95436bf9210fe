#include "nilm/data_io.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace nilm {

namespace {

// Parses one channel line into (epoch, watts). Returns false on blank lines.
bool parse_line(const std::string& line, const ChannelFormat& fmt, std::int64_t& epoch,
                double& watts) {
    std::size_t begin = line.find_first_not_of(" \r");
    if (begin == std::string::npos) return false;
    const std::size_t cut = line.find(fmt.delimiter, begin);
    if (cut == std::string::npos) throw IngestionError("missing delimiter");
    const std::string a = line.substr(begin, cut - begin);
    std::string b = line.substr(cut + 1);
    while (!b.empty() && (b.back() == '\r' || b.back() == ' ')) b.pop_back();
    const std::string& time_str = fmt.time_first ? a : b;
    const std::string& value_str = fmt.time_first ? b : a;

    errno = 0;
    char* end = nullptr;
    const double t = std::strtod(time_str.c_str(), &end);
    if (end == time_str.c_str() || *end != '\0' || errno != 0 || !std::isfinite(t))
        throw IngestionError("unparseable timestamp '" + time_str + "'");
    errno = 0;
    const double v = std::strtod(value_str.c_str(), &end);
    if (end == value_str.c_str() || *end != '\0' || errno != 0 || !std::isfinite(v))
        throw IngestionError("unparseable reading '" + value_str + "'");
    epoch = static_cast<std::int64_t>(std::llround(t));
    watts = v;
    return true;
}

}  // namespace

TimeSeries load_channel(const std::string& path, const ChannelFormat& format,
                        std::int64_t interval, NegativePolicy negatives) {
    if (interval <= 0) throw ConfigError("load_channel: interval must be positive");
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open channel file: " + path);

    TimeSeries out;
    out.interval = interval;
    std::string line;
    std::size_t line_no = 0;
    std::int64_t prev_index = -1;
    bool first = true;
    bool any_missing = false;

    while (std::getline(in, line)) {
        ++line_no;
        std::int64_t epoch = 0;
        double watts = 0.0;
        try {
            if (!parse_line(line, format, epoch, watts)) continue;
        } catch (const IngestionError& e) {
            throw IngestionError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (watts < 0.0) {
            if (negatives == NegativePolicy::reject)
                throw IngestionError(path + ":" + std::to_string(line_no) +
                                     ": negative reading " + std::to_string(watts));
            watts = 0.0;
        }
        if (first) {
            out.start_epoch = epoch;
            first = false;
        }
        // snap onto the declared grid
        const double offset = static_cast<double>(epoch - out.start_epoch) /
                              static_cast<double>(interval);
        const std::int64_t index = std::llround(offset);
        if (index <= prev_index)
            throw IngestionError(path + ":" + std::to_string(line_no) +
                                 ": non-monotone timestamp " + std::to_string(epoch));
        for (std::int64_t g = prev_index + 1; g < index; ++g) {
            out.values.push_back(0.0);
            out.missing.push_back(1);
            any_missing = true;
        }
        out.values.push_back(watts);
        out.missing.push_back(0);
        prev_index = index;
    }
    if (out.values.empty()) throw IngestionError("empty channel file: " + path);
    if (!any_missing) out.missing.clear();
    return out;
}

void save_channel(const TimeSeries& series, const std::string& path,
                  const ChannelFormat& format) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write channel file: " + path);
    out.precision(10);
    for (std::size_t i = 0; i < series.length(); ++i) {
        if (series.is_missing(i)) continue;
        if (format.time_first)
            out << series.time_at(i) << format.delimiter << series.values[i] << '\n';
        else
            out << series.values[i] << format.delimiter << series.time_at(i) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

namespace {

// Nearest present sample for grid time g, forward-filling up to gap_limit.
// Returns false when nothing usable is close enough.
bool sample_at(const TimeSeries& s, std::int64_t g, std::int64_t gap_limit, double& out) {
    const std::int64_t rel = g - s.start_epoch;
    std::int64_t idx = (rel + s.interval / 2) / s.interval;  // nearest grid index
    idx = std::clamp<std::int64_t>(idx, 0, static_cast<std::int64_t>(s.length()) - 1);
    const auto u = static_cast<std::size_t>(idx);
    if (!s.is_missing(u) && std::llabs(s.time_at(u) - g) * 2 <= s.interval) {
        out = s.values[u];
        return true;
    }
    // walk backwards: last known value no older than gap_limit
    for (std::int64_t j = idx; j >= 0; --j) {
        const auto w = static_cast<std::size_t>(j);
        const std::int64_t t = s.time_at(w);
        if (t > g) continue;
        if (g - t > gap_limit) break;
        if (!s.is_missing(w)) {
            out = s.values[w];
            return true;
        }
    }
    return false;
}

}  // namespace

AlignedPair align_resample(const TimeSeries& mains, const TimeSeries& appliance,
                           std::int64_t interval, std::int64_t gap_limit_seconds) {
    if (interval <= 0) throw ConfigError("align_resample: interval must be positive");
    mains.validate();
    appliance.validate();
    const std::int64_t begin = std::max(mains.start_epoch, appliance.start_epoch);
    const std::int64_t end = std::min(mains.end_epoch(), appliance.end_epoch());
    if (begin > end) throw AlignmentError("align_resample: series do not overlap in time");

    const std::size_t count = static_cast<std::size_t>((end - begin) / interval) + 1;
    AlignedPair pair;
    pair.mains.start_epoch = pair.appliance.start_epoch = begin;
    pair.mains.interval = pair.appliance.interval = interval;
    pair.mains.values.resize(count);
    pair.appliance.values.resize(count);
    bool mains_gap = false;

    for (std::size_t i = 0; i < count; ++i) {
        const std::int64_t g = begin + static_cast<std::int64_t>(i) * interval;
        double v = 0.0;
        if (sample_at(mains, g, gap_limit_seconds, v)) {
            pair.mains.values[i] = v;
        } else {
            if (!mains_gap) {
                pair.mains.missing.assign(count, 0);
                mains_gap = true;
            }
            pair.mains.missing[i] = 1;
        }
        // unresolvable appliance gaps read as "off"
        pair.appliance.values[i] = sample_at(appliance, g, gap_limit_seconds, v) ? v : 0.0;
    }
    pair.validate();
    return pair;
}

std::vector<double> standardize(const std::vector<double>& values, const NormStats& stats) {
    if (stats.std <= 0.0) throw ConfigError("standardize: std must be > 0");
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - stats.mean) / stats.std;
    return out;
}

Tensor standardize(const TimeSeries& series, const NormStats& stats) {
    return Tensor::row(standardize(series.values, stats));
}

TimeSeries destandardize(const Tensor& tensor, const NormStats& stats,
                         std::int64_t start_epoch, std::int64_t interval) {
    if (stats.std <= 0.0) throw ConfigError("destandardize: std must be > 0");
    TimeSeries out;
    out.start_epoch = start_epoch;
    out.interval = interval;
    out.values.resize(tensor.size());
    for (std::size_t i = 0; i < tensor.size(); ++i)
        out.values[i] = tensor[i] * stats.std + stats.mean;
    return out;
}

NormStats compute_stats(const TimeSeries& series) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < series.length(); ++i) {
        if (series.is_missing(i)) continue;
        sum += series.values[i];
        ++n;
    }
    if (n == 0) throw ConfigError("compute_stats: series has no present samples");
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < series.length(); ++i) {
        if (series.is_missing(i)) continue;
        const double d = series.values[i] - mean;
        ss += d * d;
    }
    double std = std::sqrt(ss / static_cast<double>(n));
    if (std < 1e-12) std = 1.0;  // constant channel: center only
    return {mean, std};
}

namespace {

nlohmann::json profile_to_json(const ApplianceProfile& p) {
    return {{"name", p.name},
            {"window_length", p.window_length},
            {"max_power", p.max_power},
            {"on_threshold", p.on_threshold},
            {"norm_mean", p.norm_mean},
            {"norm_std", p.norm_std}};
}

ApplianceProfile profile_from_json(const nlohmann::json& j) {
    ApplianceProfile p;
    p.name = j.at("name").get<std::string>();
    p.window_length = j.at("window_length").get<int>();
    p.max_power = j.at("max_power").get<double>();
    p.on_threshold = j.at("on_threshold").get<double>();
    p.norm_mean = j.at("norm_mean").get<double>();
    p.norm_std = j.at("norm_std").get<double>();
    p.validate();
    return p;
}

}  // namespace

std::vector<ApplianceProfile> load_profiles(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open profile file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError("malformed profile file " + path + ": " + e.what());
    }
    std::vector<ApplianceProfile> out;
    try {
        for (const auto& item : j.at("appliances")) out.push_back(profile_from_json(item));
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError("malformed profile file " + path + ": " + e.what());
    }
    return out;
}

void save_profiles(const std::vector<ApplianceProfile>& profiles, const std::string& path) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : profiles) arr.push_back(profile_to_json(p));
    std::ofstream out(path);
    if (!out) throw IoError("cannot write profile file: " + path);
    out << nlohmann::json{{"appliances", arr}}.dump(2) << '\n';
}

std::vector<ApplianceProfile> default_profiles() {
    return {
        {"kettle", 599, 3948.0, 2000.0, 700.0, 1000.0},
        {"microwave", 599, 3138.0, 200.0, 500.0, 800.0},
        {"fridge", 599, 2572.0, 50.0, 200.0, 400.0},
        {"dishwasher", 599, 3230.0, 10.0, 700.0, 1000.0},
        {"washingmachine", 599, 3962.0, 20.0, 400.0, 700.0},
    };
}

ApplianceProfile find_profile(const std::vector<ApplianceProfile>& profiles,
                              const std::string& name) {
    for (const auto& p : profiles)
        if (p.name == name) return p;
    throw ConfigError("no profile named '" + name + "'");
}

}  // namespace nilm
