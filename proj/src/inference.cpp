#include "nilm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "nilm/data_io.hpp"

namespace nilm {

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

double clamp_watts(double v, double max_power) {
    return std::min(std::max(v, 0.0), max_power);
}

void require_head(const Model& model, HeadKind head, const char* op) {
    if (model.net.config().head != head)
        throw ConfigError(std::string(op) + ": model has a " +
                          head_kind_name(model.net.config().head) + " head, needs " +
                          head_kind_name(head));
}

Prediction finish_prediction(const Model& model, const TimeSeries& mains,
                             std::vector<double>&& std_values) {
    const ApplianceProfile& prof = model.meta.profile;
    for (double& v : std_values)
        v = clamp_watts(prof.norm_mean + prof.norm_std * v, prof.max_power);
    Prediction p;
    p.appliance = prof.name;
    p.series.start_epoch = mains.start_epoch;
    p.series.interval = mains.interval;
    p.series.values = std::move(std_values);
    return p;
}

}  // namespace

Prediction predict_point(const Model& model, const TimeSeries& mains) {
    require_head(model, HeadKind::point, "predict_point");
    mains.validate();
    const int W = model.net.config().window_length;
    const WindowBatch windows =
        make_inference_windows(mains, W, model.meta.mains_stats, /*padded=*/true);

    BatchEvaluator eval(model.net);
    std::vector<double> out(mains.length());
    // Bounded slices keep the forward buffers small on long series.
    const std::size_t step = 2048;
    for (std::size_t b = 0; b < windows.count(); b += step) {
        const std::size_t e = std::min(windows.count(), b + step);
        const Tensor pred = eval.forward_all(windows.slice(b, e));
        for (std::size_t r = 0; r < e - b; ++r) out[b + r] = pred.at(r, 0);
    }
    return finish_prediction(model, mains, std::move(out));
}

std::vector<double> overlap_average(const Tensor& window_preds, std::size_t T) {
    if (window_preds.rank() != 2 || window_preds.dim(0) == 0)
        throw ConfigError("overlap_average: expected a nonempty [N, W] tensor");
    const std::size_t N = window_preds.dim(0);
    const std::size_t W = window_preds.dim(1);
    if (T != N + W - 1)
        throw ConfigError("overlap_average: T must equal N + W - 1");
    std::vector<double> mean(T, 0.0);
    std::vector<std::uint32_t> covered(T, 0);
    for (std::size_t r = 0; r < N; ++r) {
        const double* row = window_preds.data() + r * W;
        for (std::size_t j = 0; j < W; ++j) {
            const std::size_t i = r + j;
            mean[i] += (row[j] - mean[i]) / static_cast<double>(++covered[i]);
        }
    }
    return mean;
}

Prediction predict_seq_overlap(const Model& model, const TimeSeries& mains) {
    require_head(model, HeadKind::seq, "predict_seq_overlap");
    mains.validate();
    const int W = model.net.config().window_length;
    if (mains.length() < static_cast<std::size_t>(W))
        throw InferenceError("predict_seq_overlap: series length " +
                             std::to_string(mains.length()) + " is shorter than the window " +
                             std::to_string(W));
    const WindowBatch windows =
        make_inference_windows(mains, W, model.meta.mains_stats, /*padded=*/false);

    BatchEvaluator eval(model.net);
    const Tensor pred = eval.forward_all(windows);  // [N, W], window r starts at r
    return finish_prediction(model, mains, overlap_average(pred, mains.length()));
}

Prediction predict(const Model& model, const TimeSeries& mains) {
    return model.net.config().head == HeadKind::point ? predict_point(model, mains)
                                                      : predict_seq_overlap(model, mains);
}

double mae(const std::vector<double>& pred, const std::vector<double>& truth) {
    if (pred.size() != truth.size())
        throw MetricError("mae: length mismatch (" + std::to_string(pred.size()) + " vs " +
                          std::to_string(truth.size()) + ")");
    if (pred.empty()) throw MetricError("mae: empty series");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) total += std::fabs(pred[i] - truth[i]);
    return total / static_cast<double>(pred.size());
}

double sae(const std::vector<double>& pred, const std::vector<double>& truth) {
    if (pred.size() != truth.size())
        throw MetricError("sae: length mismatch (" + std::to_string(pred.size()) + " vs " +
                          std::to_string(truth.size()) + ")");
    double r_hat = 0.0, r = 0.0;
    for (double v : pred) r_hat += v;
    for (double v : truth) r += v;
    if (!(r > 0.0)) throw MetricError("sae undefined: truth sums to zero");
    return std::fabs(r_hat - r) / r;
}

EvalReport score_prediction(const Prediction& prediction, const AlignedPair& pair,
                            std::size_t window_count) {
    pair.validate();
    const std::vector<double>& p = prediction.series.values;
    const std::vector<double>& t = pair.appliance.values;

    EvalReport report;
    report.appliance = prediction.appliance;
    report.window_count = window_count;
    report.mae = mae(p, t);
    try {
        report.sae = sae(p, t);
    } catch (const MetricError&) {
        report.sae.reset();
    }

    // Cut calendar days from the epoch timestamps.
    std::map<std::int64_t, std::pair<std::size_t, std::size_t>> days;  // day -> [begin, end)
    for (std::size_t i = 0; i < pair.length(); ++i) {
        const std::int64_t ts = pair.mains.time_at(i);
        const std::int64_t day =
            ts >= 0 ? ts / kSecondsPerDay : (ts - (kSecondsPerDay - 1)) / kSecondsPerDay;
        auto [it, fresh] = days.try_emplace(day, i, i + 1);
        if (!fresh) it->second.second = i + 1;
    }
    for (const auto& [day, span] : days) {
        const std::vector<double> pd(p.begin() + static_cast<std::ptrdiff_t>(span.first),
                                     p.begin() + static_cast<std::ptrdiff_t>(span.second));
        const std::vector<double> td(t.begin() + static_cast<std::ptrdiff_t>(span.first),
                                     t.begin() + static_cast<std::ptrdiff_t>(span.second));
        try {
            report.per_day.push_back({day, sae(pd, td)});
        } catch (const MetricError&) {
            ++report.days_skipped;
        }
    }
    return report;
}

EvalReport evaluate(const Model& model, const AlignedPair& pair, const ApplianceProfile& profile) {
    pair.validate();
    if (profile.name != model.meta.profile.name)
        throw ConfigError("evaluate: model was trained for '" + model.meta.profile.name +
                          "', asked to score '" + profile.name + "'");

    const Prediction prediction = predict(model, pair.mains);
    const int W = model.net.config().window_length;
    const std::size_t window_count = model.net.config().head == HeadKind::point
                                         ? pair.length()
                                         : pair.length() - static_cast<std::size_t>(W) + 1;
    return score_prediction(prediction, pair, window_count);
}

std::optional<double> EvalReport::per_day_mean() const {
    if (per_day.empty()) return std::nullopt;
    double total = 0.0;
    for (const DaySae& d : per_day) total += d.sae;
    return total / static_cast<double>(per_day.size());
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::string EvalReport::to_kv() const {
    std::ostringstream os;
    os << "appliance " << appliance << '\n';
    os << "window_count " << window_count << '\n';
    os << "mae_watts " << fmt(mae) << '\n';
    os << "sae " << (sae ? fmt(*sae) : "undefined") << '\n';
    const auto day_mean = per_day_mean();
    os << "sae_per_day_mean " << (day_mean ? fmt(*day_mean) : "undefined") << '\n';
    os << "days_scored " << per_day.size() << '\n';
    os << "days_skipped " << days_skipped << '\n';
    for (const DaySae& d : per_day) os << "sae_day_" << d.day << ' ' << fmt(d.sae) << '\n';
    return os.str();
}

void save_trace(const Prediction& prediction, const std::string& path) {
    save_channel(prediction.series, path);
}

void save_eval_report(const EvalReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open report for writing: " + path);
    out << report.to_kv();
    if (!out) throw IoError("failed writing report: " + path);
}

}  // namespace nilm
