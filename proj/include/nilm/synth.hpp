#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nilm/common.hpp"
#include "nilm/timeseries.hpp"

namespace nilm {

enum class RampShape {
    rectangular,  // constant power for the whole activation
    two_level,    // full power for the first half, half power after
};

// One appliance's signature generator. Jitters are half-widths of uniform
// draws around the means; zero jitter makes every activation identical.
struct SyntheticApplianceSpec {
    std::string name;
    double on_power_mean = 0.0;        // Watts
    double on_power_jitter = 0.0;      // Watts
    double on_duration_mean = 1.0;     // samples
    double on_duration_jitter = 0.0;   // samples
    double activations_per_day = 0.0;  // expected rate
    RampShape shape = RampShape::rectangular;
    bool periodic = false;  // evenly spaced starts instead of random placement

    void validate() const;  // powers > 0 (net of jitter), durations >= 1
};

// Slow bounded random walk standing in for every unmetered device.
struct UnknownLoadSpec {
    bool enabled = true;
    double low = 50.0;    // Watts
    double high = 300.0;  // Watts
    double step_std = 2.0;

    void validate() const;
};

// y_t = sum_i x_it + u_t + eps_t, clamped at zero.
struct SyntheticScene {
    std::vector<SyntheticApplianceSpec> appliances;
    UnknownLoadSpec unknown;
    double noise_std = 10.0;       // sigma of eps_t
    std::size_t length = 0;        // T, samples
    std::int64_t interval = 6;     // seconds
    std::int64_t start_epoch = 0;  // seconds
    std::uint64_t seed = 0;

    void validate() const;
};

// A contiguous ON period.
struct Activation {
    std::size_t start = 0;     // sample index
    std::size_t duration = 0;  // samples
    double power = 0.0;        // Watts (level; two_level halves after midpoint)
};

// Jittered, non-overlapping activations for one appliance across T samples.
// Count = round(rate * T * interval / 86400). Throws GenerationError when the
// drawn activations cannot fit without overlap.
std::vector<Activation> materialize_activations(const SyntheticApplianceSpec& spec, std::size_t T,
                                                std::int64_t interval, Rng& rng);

TimeSeries gen_appliance(const SyntheticApplianceSpec& spec, std::size_t T, std::int64_t interval,
                         std::int64_t start_epoch, std::uint64_t seed);

TimeSeries gen_unknown_load(const UnknownLoadSpec& spec, std::size_t T, std::int64_t interval,
                            std::int64_t start_epoch, std::uint64_t seed);

struct SceneData {
    TimeSeries mains;
    std::vector<TimeSeries> truth;  // one per appliance, unclamped
    TimeSeries unknown;             // zeros when disabled
    std::vector<std::vector<Activation>> activations;  // per appliance
};

// Appliance streams are seeded independently of sigma and the unknown load,
// so truth series are identical across noise settings for one scene seed.
SceneData gen_mains(const SyntheticScene& scene);

struct Perturbation {
    enum class Kind { remove, scale, stretch };
    Kind kind = Kind::remove;
    double factor = 1.0;  // alpha for scale, beta for stretch

    static Perturbation remove() { return {Kind::remove, 0.0}; }
    static Perturbation scale(double alpha) { return {Kind::scale, alpha}; }
    static Perturbation stretch(double beta) { return {Kind::stretch, beta}; }
};

// Modifies a raw (Watts) mains window given the appliance truth over the same
// span. remove: window - truth; scale(a): window + (a-1)*truth; stretch(b):
// the activation run is nearest-neighbor time-stretched to b times its
// duration at equal power and re-summed additively (window - run + stretched),
// truncated at the window edge. Throws PerturbationError when truth has no
// positive sample.
std::vector<double> perturb_window(const std::vector<double>& window,
                                   const std::vector<double>& truth, const Perturbation& kind);

// Two-appliance scene (kettle-like bursts over a periodic fridge-like base)
// sized to `days` of samples at a 6 s interval.
SyntheticScene default_scene(std::uint64_t seed, double days = 7.0);

// Writes mains + per-appliance truth channels under dir as `<name>.csv`.
std::vector<std::string> save_scene(const SceneData& data,
                                    const std::vector<SyntheticApplianceSpec>& specs,
                                    const std::string& dir);

}  // namespace nilm
