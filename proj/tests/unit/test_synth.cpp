#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "nilm/data_io.hpp"
#include "nilm/synth.hpp"

using namespace nilm;
namespace fs = std::filesystem;

namespace {

// Rate chosen so exactly one activation materializes over T samples.
SyntheticApplianceSpec single_burst(std::size_t T, std::int64_t interval, double power,
                                    double duration) {
    SyntheticApplianceSpec spec;
    spec.name = "burst";
    spec.on_power_mean = power;
    spec.on_duration_mean = duration;
    spec.activations_per_day = 86400.0 / (static_cast<double>(T) * static_cast<double>(interval));
    return spec;
}

}  // namespace

TEST_CASE("zero rate produces an all-zero channel") {
    SyntheticApplianceSpec spec = single_burst(100, 6, 100.0, 10.0);
    spec.activations_per_day = 0.0;
    const TimeSeries s = gen_appliance(spec, 100, 6, 0, 1);
    CHECK(s.length() == 100);
    for (double v : s.values) CHECK(v == 0.0);
}

TEST_CASE("a jitter-free activation paints its exact rectangle") {
    const SyntheticApplianceSpec spec = single_burst(100, 6, 2500.0, 30.0);
    Rng rng(3);
    const std::vector<Activation> acts = materialize_activations(spec, 100, 6, rng);
    REQUIRE(acts.size() == 1);
    CHECK(acts[0].duration == 30);
    CHECK(acts[0].power == 2500.0);
    CHECK(acts[0].start + acts[0].duration <= 100);

    const TimeSeries s = gen_appliance(spec, 100, 6, 0, 3);
    double total = 0.0;
    std::size_t on = 0;
    for (double v : s.values) {
        total += v;
        if (v > 0.0) {
            ++on;
            CHECK(v == 2500.0);
        }
    }
    CHECK(on == 30);
    CHECK(total == 30 * 2500.0);
}

TEST_CASE("two_level activations drop to half power after the midpoint") {
    SyntheticApplianceSpec spec = single_burst(60, 6, 100.0, 5.0);
    spec.shape = RampShape::two_level;
    const TimeSeries s = gen_appliance(spec, 60, 6, 0, 4);
    std::vector<double> run;
    for (double v : s.values)
        if (v > 0.0) run.push_back(v);
    CHECK(run == std::vector<double>{100, 100, 100, 50, 50});
}

TEST_CASE("drawn durations track the configured mean") {
    SyntheticApplianceSpec spec;
    spec.name = "mc";
    spec.on_power_mean = 100.0;
    spec.on_duration_mean = 20.0;
    spec.on_duration_jitter = 8.0;
    spec.activations_per_day = 144.0;  // 200 activations over 20000 samples at 6 s
    Rng rng(5);
    const std::vector<Activation> acts = materialize_activations(spec, 20000, 6, rng);
    REQUIRE(acts.size() == 200);
    double mean = 0.0;
    std::size_t prev_end = 0;
    bool first = true;
    for (const Activation& a : acts) {
        mean += static_cast<double>(a.duration);
        CHECK(a.duration >= 12);
        CHECK(a.duration <= 28);
        if (!first) CHECK(a.start > prev_end);  // >= 1 OFF sample between runs
        prev_end = a.start + a.duration;
        first = false;
    }
    mean /= 200.0;
    CHECK(mean == doctest::Approx(20.0).epsilon(0.05));
}

TEST_CASE("impossible rates are generation errors") {
    SyntheticApplianceSpec spec = single_burst(50, 6, 100.0, 20.0);
    spec.activations_per_day *= 5.0;  // five 20-sample activations into 50 samples
    Rng rng(6);
    CHECK_THROWS_AS(materialize_activations(spec, 50, 6, rng), GenerationError);

    SyntheticApplianceSpec dense = single_burst(10, 6, 100.0, 1.0);
    dense.periodic = true;
    dense.activations_per_day *= 6.0;  // period < 2 samples
    Rng rng2(7);
    CHECK_THROWS_AS(materialize_activations(dense, 10, 6, rng2), GenerationError);
}

TEST_CASE("periodic placement is evenly spaced") {
    SyntheticApplianceSpec spec = single_burst(100, 6, 120.0, 5.0);
    spec.periodic = true;
    spec.activations_per_day *= 4.0;  // n = 4, period 25
    Rng rng(8);
    const std::vector<Activation> acts = materialize_activations(spec, 100, 6, rng);
    REQUIRE(acts.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(acts[i].start == 25 * i);
        CHECK(acts[i].duration == 5);
    }
}

TEST_CASE("bad specs fail validation") {
    SyntheticApplianceSpec spec = single_burst(100, 6, 100.0, 10.0);
    spec.on_power_jitter = 100.0;  // jitter must stay below the mean
    Rng rng(9);
    CHECK_THROWS_AS(materialize_activations(spec, 100, 6, rng), ConfigError);
    spec = single_burst(100, 6, 100.0, 3.0);
    spec.on_duration_jitter = 5.0;  // would allow durations < 1
    CHECK_THROWS_AS(materialize_activations(spec, 100, 6, rng), ConfigError);
}

TEST_CASE("noise-free single-appliance mains equal the truth bit-for-bit") {
    SyntheticScene scene;
    scene.appliances = {single_burst(200, 6, 1500.0, 25.0)};
    scene.unknown.enabled = false;
    scene.noise_std = 0.0;
    scene.length = 200;
    scene.seed = 10;
    const SceneData data = gen_mains(scene);
    REQUIRE(data.truth.size() == 1);
    CHECK(data.mains.values == data.truth[0].values);
    for (double v : data.unknown.values) CHECK(v == 0.0);
}

TEST_CASE("noise-free mains are the ordered sum of integer-valued channels") {
    SyntheticScene scene;
    scene.appliances = {single_burst(200, 6, 2000.0, 20.0), single_burst(200, 6, 150.0, 60.0)};
    scene.appliances[1].name = "base";
    scene.unknown.enabled = false;
    scene.noise_std = 0.0;
    scene.length = 200;
    scene.seed = 11;
    const SceneData data = gen_mains(scene);
    for (std::size_t t = 0; t < 200; ++t)
        CHECK(data.mains.values[t] == data.truth[0].values[t] + data.truth[1].values[t]);
}

TEST_CASE("mains noise has roughly the configured sigma") {
    SyntheticScene scene;
    scene.unknown = UnknownLoadSpec{};  // walk in [50, 300] keeps the clamp idle
    scene.noise_std = 10.0;
    scene.length = 20000;
    scene.seed = 12;
    const SceneData data = gen_mains(scene);
    double mean = 0.0, sq = 0.0;
    for (std::size_t t = 0; t < scene.length; ++t) {
        const double r = data.mains.values[t] - data.unknown.values[t];
        mean += r;
        sq += r * r;
    }
    mean /= static_cast<double>(scene.length);
    const double var = sq / static_cast<double>(scene.length) - mean * mean;
    CHECK(std::fabs(mean) < 0.5);
    CHECK(std::sqrt(var) == doctest::Approx(10.0).epsilon(0.1));
}

TEST_CASE("truth channels do not depend on the noise setting") {
    SyntheticScene a;
    a.appliances = {single_burst(300, 6, 900.0, 12.0)};
    a.length = 300;
    a.seed = 13;
    a.noise_std = 0.0;
    SyntheticScene b = a;
    b.noise_std = 50.0;
    const SceneData da = gen_mains(a), db = gen_mains(b);
    CHECK(da.truth[0].values == db.truth[0].values);
    CHECK(da.unknown.values == db.unknown.values);
    CHECK(da.mains.values != db.mains.values);

    // and the whole scene is reproducible for one seed
    const SceneData da2 = gen_mains(a);
    CHECK(da.mains.values == da2.mains.values);
}

TEST_CASE("perturbations: remove and scale are exact arithmetic") {
    const std::vector<double> truth{0, 0, 10, 20, 30, 0, 0, 0, 0, 0, 0, 0};
    std::vector<double> window(12, 100.0);
    for (std::size_t i = 0; i < 12; ++i) window[i] += truth[i];

    const std::vector<double> removed = perturb_window(window, truth, Perturbation::remove());
    CHECK(removed == std::vector<double>(12, 100.0));

    const std::vector<double> doubled = perturb_window(window, truth, Perturbation::scale(2.0));
    for (std::size_t i = 0; i < 12; ++i) CHECK(doubled[i] == window[i] + truth[i]);

    const std::vector<double> halved = perturb_window(window, truth, Perturbation::scale(0.5));
    for (std::size_t i = 0; i < 12; ++i) CHECK(halved[i] == window[i] - 0.5 * truth[i]);

    // identity factors are bit-identical, not merely close
    CHECK(perturb_window(window, truth, Perturbation::scale(1.0)) == window);
    CHECK(perturb_window(window, truth, Perturbation::stretch(1.0)) == window);
}

TEST_CASE("stretch(2) doubles the run with nearest-neighbor samples") {
    const std::vector<double> truth{0, 0, 10, 20, 30, 0, 0, 0, 0, 0, 0, 0};
    std::vector<double> window(12, 100.0);
    for (std::size_t i = 0; i < 12; ++i) window[i] += truth[i];
    const std::vector<double> out = perturb_window(window, truth, Perturbation::stretch(2.0));
    CHECK(out == std::vector<double>{100, 100, 110, 110, 120, 120, 130, 130, 100, 100, 100, 100});
}

TEST_CASE("stretch(0.5) shrinks the run and blanks its tail") {
    const std::vector<double> truth{0, 0, 0, 0, 8, 6, 4, 2, 0, 0, 0, 0};
    std::vector<double> window(12, 50.0);
    for (std::size_t i = 0; i < 12; ++i) window[i] += truth[i];
    const std::vector<double> out = perturb_window(window, truth, Perturbation::stretch(0.5));
    CHECK(out == std::vector<double>{50, 50, 50, 50, 58, 54, 50, 50, 50, 50, 50, 50});
}

TEST_CASE("stretch picks the run under the midpoint and truncates at the edge") {
    // two runs; the midpoint (index 5) sits in the second
    const std::vector<double> truth{5, 5, 0, 0, 7, 7, 7, 7, 0, 0, 0};
    std::vector<double> window(11, 20.0);
    for (std::size_t i = 0; i < 11; ++i) window[i] += truth[i];
    const std::vector<double> out = perturb_window(window, truth, Perturbation::stretch(2.0));
    CHECK(out[0] == window[0]);  // first run untouched
    CHECK(out[1] == window[1]);
    for (std::size_t i = 4; i < 11; ++i) CHECK(out[i] == 27.0);  // doubled run, clipped at T
}

TEST_CASE("perturbation contracts") {
    const std::vector<double> window(8, 10.0);
    const std::vector<double> zeros(8, 0.0);
    CHECK_THROWS_AS(perturb_window(window, zeros, Perturbation::remove()), PerturbationError);
    CHECK_THROWS_AS(perturb_window(window, std::vector<double>(7, 1.0), Perturbation::remove()),
                    ConfigError);
    const std::vector<double> truth{0, 1, 1, 0, 0, 0, 0, 0};
    CHECK_THROWS_AS(perturb_window(window, truth, Perturbation::stretch(0.0)), ConfigError);

    // removing is a fixed point: once the appliance is gone there is nothing
    // left to perturb
    const std::vector<double> gone = perturb_window(window, truth, Perturbation::remove());
    CHECK_THROWS_AS(perturb_window(gone, zeros, Perturbation::remove()), PerturbationError);
}

TEST_CASE("default scene generates and saves a loadable corpus") {
    const SyntheticScene scene = default_scene(14, 0.05);  // 720 samples
    CHECK(scene.length == 720);
    REQUIRE(scene.appliances.size() == 2);
    CHECK(scene.appliances[0].name == "kettle");
    CHECK(scene.appliances[1].name == "fridge");

    const SceneData data = gen_mains(scene);
    CHECK(data.mains.length() == 720);
    REQUIRE(data.activations.size() == 2);
    CHECK(data.activations[0].size() == 1);  // 20/day over 0.05 days
    CHECK(data.activations[1].size() == 5);  // periodic fridge, 96/day

    const fs::path dir = fs::temp_directory_path() / ("nilm_synth_" + std::to_string(::getpid()));
    const std::vector<std::string> paths =
        save_scene(data, scene.appliances, dir.string());
    REQUIRE(paths.size() == 3);
    CHECK(fs::path(paths[0]).filename() == "mains.csv");
    CHECK(fs::path(paths[1]).filename() == "kettle.csv");

    const TimeSeries mains = load_channel(paths[0], {}, 6);
    REQUIRE(mains.length() == 720);
    for (std::size_t i = 0; i < 720; ++i)
        CHECK(std::fabs(mains.values[i] - data.mains.values[i]) <= 1e-5);
    fs::remove_all(dir);
}
