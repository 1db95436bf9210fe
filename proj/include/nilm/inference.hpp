#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nilm/model.hpp"
#include "nilm/timeseries.hpp"

namespace nilm {

// Full-length disaggregated trace in Watts, clamped to [0, max-power].
struct Prediction {
    std::string appliance;
    TimeSeries series;
};

struct DaySae {
    std::int64_t day = 0;  // floor(epoch / 86400)
    double sae = 0.0;
};

struct EvalReport {
    std::string appliance;
    std::size_t window_count = 0;
    double mae = 0.0;
    std::optional<double> sae;     // unset when the truth sums to zero
    std::vector<DaySae> per_day;   // zero-truth days are skipped
    std::size_t days_skipped = 0;

    // mean of per_day entries; unset when none are defined
    std::optional<double> per_day_mean() const;

    std::string to_kv() const;  // machine-readable `key value` lines
};

// Averages stride-1 window predictions [N, W] (window r starts at sample r)
// back into a length-T series, T = N + W - 1. Running means keep the
// reconstruction exact when all windows covering a position agree.
std::vector<double> overlap_average(const Tensor& window_preds, std::size_t T);

// One destandardized Watt value per input sample; output[i] comes from the
// window whose midpoint is i. Mains must be gap-free.
Prediction predict_point(const Model& model, const TimeSeries& mains);

// Overlap-averaged reconstruction: output[i] is the running mean of every
// window prediction covering position i. Requires T >= W.
Prediction predict_seq_overlap(const Model& model, const TimeSeries& mains);

// Dispatches on the model head.
Prediction predict(const Model& model, const TimeSeries& mains);

// (1/T) sum |pred - truth|
double mae(const std::vector<double>& pred, const std::vector<double>& truth);

// |sum(pred) - sum(truth)| / sum(truth); requires sum(truth) > 0
double sae(const std::vector<double>& pred, const std::vector<double>& truth);

// Predicts on pair.mains and scores against pair.appliance. Day boundaries
// for per-day SAE are cut from the series' epoch timestamps.
EvalReport evaluate(const Model& model, const AlignedPair& pair, const ApplianceProfile& profile);

// Scoring half of evaluate(), usable with any prediction source. Zero-sum
// truth leaves sae unset overall and skips zero-sum days.
EvalReport score_prediction(const Prediction& prediction, const AlignedPair& pair,
                            std::size_t window_count);

// Trace file: one `epoch_seconds,watts` line per sample.
void save_trace(const Prediction& prediction, const std::string& path);

void save_eval_report(const EvalReport& report, const std::string& path);

}  // namespace nilm
