#include "nilm/windowing.hpp"

#include <algorithm>
#include <numeric>

namespace nilm {

WindowBatch WindowBatch::slice(std::size_t begin, std::size_t end) const {
    std::vector<std::size_t> rows(end - begin);
    std::iota(rows.begin(), rows.end(), begin);
    return gather(rows, 0, rows.size());
}

WindowBatch WindowBatch::gather(const std::vector<std::size_t>& rows, std::size_t begin,
                                std::size_t end) const {
    const std::size_t n = end - begin;
    const std::size_t w = inputs.dim(1);
    const std::size_t tw = targets.dim(1);
    WindowBatch out;
    out.inputs = Tensor({n, w});
    out.targets = Tensor({n, tw});
    out.source_indices.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t src = rows[begin + r];
        std::copy_n(inputs.data() + src * w, w, out.inputs.data() + r * w);
        std::copy_n(targets.data() + src * tw, tw, out.targets.data() + r * tw);
        out.source_indices[r] = source_indices[src];
    }
    return out;
}

std::vector<double> pad_series(const std::vector<double>& values, int window_length) {
    if (window_length < 1 || window_length % 2 == 0)
        throw ConfigError("pad_series: window length must be odd, got " +
                          std::to_string(window_length));
    const std::size_t half = static_cast<std::size_t>(window_length / 2);
    std::vector<double> out(values.size() + 2 * half, 0.0);
    std::copy(values.begin(), values.end(), out.begin() + static_cast<std::ptrdiff_t>(half));
    return out;
}

namespace {

void require_gap_free(const AlignedPair& pair) {
    if (pair.mains.has_gaps() || pair.appliance.has_gaps())
        throw WindowingError("windows require gap-free series; resolve missing markers first");
}

}  // namespace

WindowBatch make_point_windows(const AlignedPair& pair, const ApplianceProfile& profile,
                               const NormStats& mains_stats) {
    pair.validate();
    profile.validate();
    require_gap_free(pair);

    const int w = profile.window_length;
    const std::size_t t = pair.length();
    const std::vector<double> mains_std = standardize(pair.mains.values, mains_stats);
    const std::vector<double> target_std =
        standardize(pair.appliance.values, {profile.norm_mean, profile.norm_std});
    const std::vector<double> padded = pad_series(mains_std, w);

    WindowBatch batch;
    batch.inputs = Tensor({t, static_cast<std::size_t>(w)});
    batch.targets = Tensor({t, 1});
    batch.source_indices.resize(t);
    for (std::size_t i = 0; i < t; ++i) {
        std::copy_n(padded.data() + i, w, batch.inputs.data() + i * static_cast<std::size_t>(w));
        batch.targets[i] = target_std[i];
        batch.source_indices[i] = static_cast<std::int64_t>(i);
    }
    return batch;
}

WindowBatch make_seq_windows(const AlignedPair& pair, const ApplianceProfile& profile,
                             const NormStats& mains_stats, int stride) {
    pair.validate();
    profile.validate();
    require_gap_free(pair);
    if (stride < 1) throw ConfigError("make_seq_windows: stride must be >= 1");

    const std::size_t w = static_cast<std::size_t>(profile.window_length);
    const std::size_t t = pair.length();
    if (t < w)
        throw WindowingError("make_seq_windows: series length " + std::to_string(t) +
                             " is shorter than the window " + std::to_string(w));
    const std::vector<double> mains_std = standardize(pair.mains.values, mains_stats);
    const std::vector<double> target_std =
        standardize(pair.appliance.values, {profile.norm_mean, profile.norm_std});

    const std::size_t count = (t - w) / static_cast<std::size_t>(stride) + 1;
    WindowBatch batch;
    batch.inputs = Tensor({count, w});
    batch.targets = Tensor({count, w});
    batch.source_indices.resize(count);
    for (std::size_t r = 0; r < count; ++r) {
        const std::size_t start = r * static_cast<std::size_t>(stride);
        std::copy_n(mains_std.data() + start, w, batch.inputs.data() + r * w);
        std::copy_n(target_std.data() + start, w, batch.targets.data() + r * w);
        batch.source_indices[r] = static_cast<std::int64_t>(start + w / 2);
    }
    return batch;
}

WindowBatch make_inference_windows(const TimeSeries& mains, int window_length,
                                   const NormStats& mains_stats, bool padded) {
    if (mains.has_gaps())
        throw InferenceError("inference requires gap-free mains; refusing to impute");
    const std::size_t w = static_cast<std::size_t>(window_length);
    const std::vector<double> mains_std = standardize(mains.values, mains_stats);

    WindowBatch batch;
    batch.targets = Tensor({0, 0}, {});
    if (padded) {
        if (window_length % 2 == 0)
            throw ConfigError("make_inference_windows: window length must be odd");
        const std::vector<double> buf = pad_series(mains_std, window_length);
        const std::size_t t = mains.length();
        batch.inputs = Tensor({t, w});
        batch.source_indices.resize(t);
        for (std::size_t i = 0; i < t; ++i) {
            std::copy_n(buf.data() + i, w, batch.inputs.data() + i * w);
            batch.source_indices[i] = static_cast<std::int64_t>(i);
        }
    } else {
        const std::size_t t = mains.length();
        if (t < w)
            throw InferenceError("series length " + std::to_string(t) +
                                 " is shorter than the window " + std::to_string(w));
        const std::size_t count = t - w + 1;
        batch.inputs = Tensor({count, w});
        batch.source_indices.resize(count);
        for (std::size_t r = 0; r < count; ++r) {
            std::copy_n(mains_std.data() + r, w, batch.inputs.data() + r * w);
            batch.source_indices[r] = static_cast<std::int64_t>(r + w / 2);
        }
    }
    return batch;
}

BatchShuffler::BatchShuffler(const WindowBatch& source, std::size_t batch_size,
                             std::uint64_t seed)
    : source_(source), batch_size_(batch_size), rng_(seed), order_(source.count()) {
    if (batch_size_ < 1) throw ConfigError("BatchShuffler: batch size must be >= 1");
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    start_epoch();
}

void BatchShuffler::start_epoch() {
    rng_.shuffle(order_);
    cursor_ = 0;
}

std::optional<WindowBatch> BatchShuffler::next() {
    if (cursor_ >= order_.size()) return std::nullopt;
    const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
    WindowBatch b = source_.gather(order_, cursor_, end);
    cursor_ = end;
    return b;
}

std::size_t BatchShuffler::batches_per_epoch() const {
    return (order_.size() + batch_size_ - 1) / batch_size_;
}

}  // namespace nilm
