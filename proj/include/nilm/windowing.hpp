#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nilm/common.hpp"
#include "nilm/data_io.hpp"
#include "nilm/tensor.hpp"
#include "nilm/timeseries.hpp"

namespace nilm {

// Stacked training/inference windows. Inputs are standardized mains windows;
// targets are standardized appliance midpoints (point) or windows (seq).
struct WindowBatch {
    Tensor inputs;   // [B, W]
    Tensor targets;  // [B, 1] or [B, W]
    std::vector<std::int64_t> source_indices;  // original midpoint sample per row

    std::size_t count() const { return inputs.empty() ? 0 : inputs.dim(0); }
    int window_length() const { return inputs.empty() ? 0 : static_cast<int>(inputs.dim(1)); }
    bool seq_targets() const { return !targets.empty() && targets.dim(1) > 1; }

    // Rows [begin, end) copied out in order.
    WindowBatch slice(std::size_t begin, std::size_t end) const;
    // Rows in the given order; used by the epoch shuffler.
    WindowBatch gather(const std::vector<std::size_t>& rows, std::size_t begin,
                       std::size_t end) const;
};

// floor(W/2) zeros on each end, so every original index is the midpoint of
// exactly one length-W window. W must be odd.
std::vector<double> pad_series(const std::vector<double>& values, int window_length);

// One window per original sample; window i midpoints at sample i and pairs
// with the appliance value there. Both channels must be gap-free.
WindowBatch make_point_windows(const AlignedPair& pair, const ApplianceProfile& profile,
                               const NormStats& mains_stats);

// All T - W + 1 unpadded window pairs at the given stride.
WindowBatch make_seq_windows(const AlignedPair& pair, const ApplianceProfile& profile,
                             const NormStats& mains_stats, int stride = 1);

// Standardized inference windows for a bare mains channel (no targets).
WindowBatch make_inference_windows(const TimeSeries& mains, int window_length,
                                   const NormStats& mains_stats, bool padded);

// Seeded epoch iterator: each epoch visits every window exactly once in a
// fresh permutation, split into batches of at most batch_size rows.
class BatchShuffler {
public:
    BatchShuffler(const WindowBatch& source, std::size_t batch_size, std::uint64_t seed);

    void start_epoch();
    std::optional<WindowBatch> next();
    std::size_t batches_per_epoch() const;

private:
    const WindowBatch& source_;
    std::size_t batch_size_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

}  // namespace nilm
