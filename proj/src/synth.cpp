#include "nilm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "nilm/data_io.hpp"

namespace nilm {

void SyntheticApplianceSpec::validate() const {
    if (name.empty()) throw ConfigError("appliance spec: name required");
    if (!(on_power_mean > 0.0)) throw ConfigError(name + ": on-power must be positive");
    if (on_power_jitter < 0.0 || on_power_jitter >= on_power_mean)
        throw ConfigError(name + ": power jitter must be in [0, mean)");
    if (!(on_duration_mean >= 1.0)) throw ConfigError(name + ": on-duration must be >= 1 sample");
    if (on_duration_jitter < 0.0 || on_duration_jitter > on_duration_mean - 1.0)
        throw ConfigError(name + ": duration jitter must keep durations >= 1");
    if (activations_per_day < 0.0) throw ConfigError(name + ": rate must be >= 0");
}

void UnknownLoadSpec::validate() const {
    if (low < 0.0 || high < low) throw ConfigError("unknown load: need 0 <= low <= high");
    if (step_std < 0.0) throw ConfigError("unknown load: step std must be >= 0");
}

void SyntheticScene::validate() const {
    if (length < 1) throw ConfigError("scene: length must be >= 1");
    if (interval < 1) throw ConfigError("scene: interval must be >= 1 second");
    if (noise_std < 0.0) throw ConfigError("scene: noise std must be >= 0");
    unknown.validate();
    for (const auto& a : appliances) a.validate();
}

namespace {

std::size_t draw_duration(const SyntheticApplianceSpec& spec, Rng& rng) {
    const double d =
        rng.uniform(spec.on_duration_mean - spec.on_duration_jitter,
                    spec.on_duration_mean + spec.on_duration_jitter);
    return static_cast<std::size_t>(std::max<long long>(1, std::llround(d)));
}

double draw_power(const SyntheticApplianceSpec& spec, Rng& rng) {
    return rng.uniform(spec.on_power_mean - spec.on_power_jitter,
                       spec.on_power_mean + spec.on_power_jitter);
}

}  // namespace

std::vector<Activation> materialize_activations(const SyntheticApplianceSpec& spec, std::size_t T,
                                                std::int64_t interval, Rng& rng) {
    spec.validate();
    if (T < 1 || interval < 1) throw ConfigError("materialize_activations: bad T or interval");
    const double days = static_cast<double>(T) * static_cast<double>(interval) / 86400.0;
    const std::size_t n =
        static_cast<std::size_t>(std::max<long long>(0, std::llround(spec.activations_per_day * days)));
    if (n == 0) return {};

    std::vector<Activation> acts(n);
    for (auto& a : acts) {
        a.duration = draw_duration(spec, rng);
        a.power = draw_power(spec, rng);
    }

    if (spec.periodic) {
        const double period = static_cast<double>(T) / static_cast<double>(n);
        if (period < 2.0)
            throw GenerationError(spec.name + ": periodic rate leaves no OFF time");
        for (std::size_t i = 0; i < n; ++i) {
            acts[i].start = static_cast<std::size_t>(std::floor(period * static_cast<double>(i)));
            // keep at least one OFF sample before the next period
            const std::size_t cap = static_cast<std::size_t>(period) - 1;
            acts[i].duration = std::min(acts[i].duration, std::max<std::size_t>(1, cap));
        }
        return acts;
    }

    std::size_t on_total = 0;
    for (const auto& a : acts) on_total += a.duration;
    const std::size_t separators = n - 1;  // >= 1 OFF sample between activations
    if (on_total + separators > T)
        throw GenerationError(spec.name + ": activation rate too high to fit " +
                              std::to_string(n) + " activations in " + std::to_string(T) +
                              " samples without overlap");

    // Stars-and-bars: split the free OFF time into n+1 random gaps.
    const std::size_t free_samples = T - on_total - separators;
    std::vector<std::size_t> cuts(n);
    for (auto& c : cuts) c = static_cast<std::size_t>(rng.uniform_int(free_samples + 1));
    std::sort(cuts.begin(), cuts.end());
    std::size_t pos = 0, prev = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t gap = cuts[i] - prev;
        prev = cuts[i];
        pos += gap;
        acts[i].start = pos;
        pos += acts[i].duration + 1;  // activation plus separator
    }
    return acts;
}

namespace {

void paint_activation(std::vector<double>& values, const Activation& a, RampShape shape) {
    const std::size_t end = std::min(values.size(), a.start + a.duration);
    if (shape == RampShape::rectangular) {
        for (std::size_t i = a.start; i < end; ++i) values[i] = a.power;
        return;
    }
    // two_level: full power for the first half (rounded up), half power after
    const std::size_t split = a.start + (a.duration + 1) / 2;
    for (std::size_t i = a.start; i < end; ++i)
        values[i] = i < split ? a.power : a.power * 0.5;
}

std::pair<TimeSeries, std::vector<Activation>> gen_appliance_full(
    const SyntheticApplianceSpec& spec, std::size_t T, std::int64_t interval,
    std::int64_t start_epoch, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Activation> acts = materialize_activations(spec, T, interval, rng);
    TimeSeries s;
    s.start_epoch = start_epoch;
    s.interval = interval;
    s.values.assign(T, 0.0);
    for (const Activation& a : acts) paint_activation(s.values, a, spec.shape);
    return {std::move(s), std::move(acts)};
}

}  // namespace

TimeSeries gen_appliance(const SyntheticApplianceSpec& spec, std::size_t T, std::int64_t interval,
                         std::int64_t start_epoch, std::uint64_t seed) {
    return gen_appliance_full(spec, T, interval, start_epoch, seed).first;
}

TimeSeries gen_unknown_load(const UnknownLoadSpec& spec, std::size_t T, std::int64_t interval,
                            std::int64_t start_epoch, std::uint64_t seed) {
    spec.validate();
    TimeSeries s;
    s.start_epoch = start_epoch;
    s.interval = interval;
    s.values.assign(T, 0.0);
    if (!spec.enabled) return s;
    Rng rng(seed);
    double level = rng.uniform(spec.low, spec.high);
    for (std::size_t i = 0; i < T; ++i) {
        s.values[i] = level;
        level = std::clamp(level + rng.normal(0.0, spec.step_std), spec.low, spec.high);
    }
    return s;
}

SceneData gen_mains(const SyntheticScene& scene) {
    scene.validate();
    SceneData out;
    const std::size_t T = scene.length;

    for (std::size_t i = 0; i < scene.appliances.size(); ++i) {
        auto [series, acts] = gen_appliance_full(scene.appliances[i], T, scene.interval,
                                                 scene.start_epoch, derive_seed(scene.seed, i + 1));
        out.truth.push_back(std::move(series));
        out.activations.push_back(std::move(acts));
    }
    out.unknown = gen_unknown_load(scene.unknown, T, scene.interval, scene.start_epoch,
                                   derive_seed(scene.seed, 0x10ad));

    out.mains.start_epoch = scene.start_epoch;
    out.mains.interval = scene.interval;
    out.mains.values.assign(T, 0.0);
    Rng noise(derive_seed(scene.seed, 0x0153));
    for (std::size_t t = 0; t < T; ++t) {
        double y = 0.0;
        for (const TimeSeries& x : out.truth) y += x.values[t];  // fixed appliance order
        y += out.unknown.values[t];
        y += scene.noise_std * noise.normal();
        out.mains.values[t] = std::max(0.0, y);
    }
    return out;
}

std::vector<double> perturb_window(const std::vector<double>& window,
                                   const std::vector<double>& truth, const Perturbation& kind) {
    if (window.size() != truth.size())
        throw ConfigError("perturb_window: window/truth length mismatch");
    if (window.empty()) throw ConfigError("perturb_window: empty window");

    std::size_t run_begin = truth.size(), run_end = truth.size();
    // pick the activation run covering the midpoint, else the first run
    const std::size_t mid = truth.size() / 2;
    auto run_at = [&](std::size_t i) {
        std::size_t b = i, e = i + 1;
        while (b > 0 && truth[b - 1] > 0.0) --b;
        while (e < truth.size() && truth[e] > 0.0) ++e;
        return std::pair<std::size_t, std::size_t>(b, e);
    };
    if (truth[mid] > 0.0) {
        std::tie(run_begin, run_end) = run_at(mid);
    } else {
        for (std::size_t i = 0; i < truth.size(); ++i)
            if (truth[i] > 0.0) {
                std::tie(run_begin, run_end) = run_at(i);
                break;
            }
    }
    if (run_begin == truth.size())
        throw PerturbationError("perturb_window: no activation in window");

    std::vector<double> out = window;
    switch (kind.kind) {
        case Perturbation::Kind::remove:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] -= truth[i];
            break;
        case Perturbation::Kind::scale: {
            const double a = kind.factor - 1.0;
            if (a != 0.0)
                for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * truth[i];
            break;
        }
        case Perturbation::Kind::stretch: {
            if (!(kind.factor > 0.0))
                throw ConfigError("perturb_window: stretch factor must be positive");
            const std::size_t d = run_end - run_begin;
            std::size_t d2 = static_cast<std::size_t>(
                std::max<long long>(1, std::llround(kind.factor * static_cast<double>(d))));
            d2 = std::min(d2, out.size() - run_begin);  // truncate at the window edge
            // nearest-neighbor resample of the run; additive delta keeps
            // stretch(1) bit-identical
            for (std::size_t j = 0; j < d2; ++j) {
                const std::size_t src = std::min(
                    d - 1, static_cast<std::size_t>(static_cast<double>(j) / kind.factor));
                const std::size_t i = run_begin + j;
                const double old = i < run_end ? truth[i] : 0.0;
                out[i] += truth[run_begin + src] - old;
            }
            for (std::size_t i = run_begin + d2; i < run_end; ++i) out[i] -= truth[i];
            break;
        }
    }
    return out;
}

SyntheticScene default_scene(std::uint64_t seed, double days) {
    if (!(days > 0.0)) throw ConfigError("default_scene: days must be positive");
    SyntheticScene scene;
    scene.seed = seed;
    scene.interval = 6;
    scene.length = static_cast<std::size_t>(std::llround(days * 86400.0 / 6.0));

    SyntheticApplianceSpec kettle;
    kettle.name = "kettle";
    kettle.on_power_mean = 2500.0;
    kettle.on_power_jitter = 300.0;
    kettle.on_duration_mean = 30.0;  // 20..40 samples at 6 s
    kettle.on_duration_jitter = 10.0;
    kettle.activations_per_day = 20.0;

    SyntheticApplianceSpec fridge;
    fridge.name = "fridge";
    fridge.on_power_mean = 120.0;
    fridge.on_power_jitter = 10.0;
    fridge.on_duration_mean = 75.0;
    fridge.on_duration_jitter = 5.0;
    fridge.activations_per_day = 96.0;  // ~50% duty at 75-sample cycles
    fridge.periodic = true;

    scene.appliances = {kettle, fridge};
    scene.unknown = UnknownLoadSpec{};  // walk in [50, 300] W
    scene.noise_std = 10.0;
    return scene;
}

std::vector<std::string> save_scene(const SceneData& data,
                                    const std::vector<SyntheticApplianceSpec>& specs,
                                    const std::string& dir) {
    if (data.truth.size() != specs.size())
        throw ConfigError("save_scene: spec/truth count mismatch");
    std::filesystem::create_directories(dir);
    std::vector<std::string> paths;
    const auto emit = [&](const TimeSeries& s, const std::string& name) {
        std::string p = (std::filesystem::path(dir) / (name + ".csv")).string();
        save_channel(s, p);
        paths.push_back(std::move(p));
    };
    emit(data.mains, "mains");
    for (std::size_t i = 0; i < specs.size(); ++i) emit(data.truth[i], specs[i].name);
    return paths;
}

}  // namespace nilm
