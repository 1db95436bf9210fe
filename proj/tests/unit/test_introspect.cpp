#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "nilm/introspect.hpp"

using namespace nilm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("nilm_intro_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string base(const std::string& name) const { return (path / name).string(); }
};

Model toy_model(HeadKind head = HeadKind::point) {
    NetworkConfig cfg;
    cfg.window_length = 9;
    cfg.trunk = {LayerSpec::conv(2, 3), LayerSpec::relu(), LayerSpec::dense(6),
                 LayerSpec::relu()};
    cfg.head = head;
    cfg.seed = 31;
    Model m{Network(cfg), {}};
    m.meta.profile.name = "toy";
    m.meta.profile.window_length = 9;
    m.meta.profile.max_power = 3000.0;
    m.meta.profile.on_threshold = 100.0;
    m.meta.profile.norm_mean = 200.0;
    m.meta.profile.norm_std = 400.0;
    m.meta.mains_stats = {0.0, 1.0};
    return m;
}

FeatureMapGrid known_grid() {
    FeatureMapGrid g;
    g.layer_index = 0;
    g.filters = 2;
    g.positions = 3;
    g.values = {-1.0, 0.0, 2.0, 1.0, -1.0, 0.5};
    return g;
}

}  // namespace

TEST_CASE("a zero window reads back the conv biases through the relu") {
    Model m = toy_model();
    const ParamBlock& bias = m.net.blocks()[1];  // layer0.bias
    REQUIRE(bias.size == 2);
    m.net.params()[bias.offset + 0] = 0.75;
    m.net.params()[bias.offset + 1] = -0.5;

    const FeatureMapGrid grid = feature_maps(m, std::vector<double>(9, 0.0), 0);
    CHECK(grid.filters == 2);
    CHECK(grid.positions == 9);
    for (std::size_t p = 0; p < 9; ++p) {
        CHECK(grid.at(0, p) == 0.75);  // relu passes the positive bias through
        CHECK(grid.at(1, p) == 0.0);   // and clips the negative one
    }
}

TEST_CASE("feature maps are deterministic and leave the model untouched") {
    const Model m = toy_model();
    const std::vector<double> before = m.net.params();
    std::vector<double> window(9);
    for (std::size_t i = 0; i < 9; ++i) window[i] = 100.0 * static_cast<double>(i);
    const FeatureMapGrid a = feature_maps(m, window, 0);
    const FeatureMapGrid b = feature_maps(m, window, 0);
    CHECK(a.values == b.values);
    CHECK(m.net.params() == before);
}

TEST_CASE("the standard trunk exposes a (50, 599) final conv grid") {
    const NetworkConfig cfg = NetworkConfig::standard(599, HeadKind::point, 0);
    Model m{Network(cfg), {}};
    m.meta.profile.window_length = 599;
    m.meta.mains_stats = {0.0, 1.0};
    const std::size_t last = last_conv_layer(m);
    CHECK(last == 8);  // five conv blocks, relu after each
    const FeatureMapGrid grid = feature_maps(m, std::vector<double>(599, 0.0), last);
    CHECK(grid.filters == 50);
    CHECK(grid.positions == 599);
}

TEST_CASE("layer contracts: wrong index, wrong length, wrong head") {
    const Model m = toy_model();
    CHECK_THROWS_AS(feature_maps(m, std::vector<double>(9, 0.0), 1), ConfigError);  // relu
    CHECK_THROWS_AS(feature_maps(m, std::vector<double>(9, 0.0), 99), ConfigError);
    CHECK_THROWS_AS(feature_maps(m, std::vector<double>(5, 0.0), 0), ConfigError);

    const Model seq = toy_model(HeadKind::seq);
    CHECK_THROWS_AS(midpoint_prediction(seq, std::vector<double>(9, 0.0)), ConfigError);
    CHECK_THROWS_AS(last_conv_layer(Model{Network(NetworkConfig{}), {}}), ConfigError);
}

TEST_CASE("midpoint prediction destandardizes and clamps") {
    Model m = toy_model();
    std::fill(m.net.params().begin(), m.net.params().end(), 0.0);
    const ParamBlock& head_bias = m.net.blocks().back();
    REQUIRE(head_bias.size == 1);

    m.net.params()[head_bias.offset] = 0.5;  // 200 + 400 * 0.5 = 400 W
    CHECK(midpoint_prediction(m, std::vector<double>(9, 0.0)) == 400.0);

    m.net.params()[head_bias.offset] = 1e5;
    CHECK(midpoint_prediction(m, std::vector<double>(9, 0.0)) == 3000.0);

    m.net.params()[head_bias.offset] = -1e5;
    CHECK(midpoint_prediction(m, std::vector<double>(9, 0.0)) == 0.0);
}

TEST_CASE("heatmap export and parse round-trip the exact doubles") {
    TempDir tmp;
    const FeatureMapGrid g = known_grid();
    const auto [txt, pgm] = export_heatmap(g, tmp.base("grid"));
    CHECK(fs::exists(txt));
    CHECK(fs::exists(pgm));

    const FeatureMapGrid back = parse_grid(txt);
    CHECK(back.filters == 2);
    CHECK(back.positions == 3);
    CHECK(back.values == g.values);  // precision-17 text is lossless for doubles

    std::ifstream in(txt);
    std::string header;
    std::getline(in, header);
    CHECK(header == "2 3");
}

TEST_CASE("pgm bytes are min-max scaled; flat grids render mid-gray") {
    TempDir tmp;
    const auto [txt, pgm] = export_heatmap(known_grid(), tmp.base("g"));
    std::ifstream in(pgm, std::ios::binary);
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string header = "P5\n3 2\n255\n";
    REQUIRE(all.size() == header.size() + 6);
    CHECK(all.substr(0, header.size()) == header);
    // lo=-1, hi=2: v -> round(255*(v+1)/3)
    const std::vector<unsigned char> want{0, 85, 255, 170, 0, 128};
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(static_cast<unsigned char>(all[header.size() + i]) == want[i]);

    FeatureMapGrid flat = known_grid();
    flat.values.assign(6, 3.25);
    const auto [txt2, pgm2] = export_heatmap(flat, tmp.base("flat"));
    std::ifstream in2(pgm2, std::ios::binary);
    std::string all2((std::istreambuf_iterator<char>(in2)), std::istreambuf_iterator<char>());
    for (std::size_t i = header.size(); i < all2.size(); ++i)
        CHECK(static_cast<unsigned char>(all2[i]) == 128);
}

TEST_CASE("grid files with damage are io errors") {
    TempDir tmp;
    const auto [txt, pgm] = export_heatmap(known_grid(), tmp.base("g"));

    const auto rewrite = [&](const std::string& content) {
        std::ofstream out(txt, std::ios::trunc);
        out << content;
    };
    rewrite("2 3\n1 2 3\n");  // truncated
    CHECK_THROWS_AS(parse_grid(txt), IoError);
    rewrite("2 3\n1 2 3 4 5 6 7\n");  // trailing value
    CHECK_THROWS_AS(parse_grid(txt), IoError);
    rewrite("0 3\n");
    CHECK_THROWS_AS(parse_grid(txt), IoError);
    CHECK_THROWS_AS(parse_grid(tmp.base("absent.txt")), IoError);

    FeatureMapGrid bad = known_grid();
    bad.values.pop_back();
    CHECK_THROWS_AS(export_heatmap(bad, tmp.base("bad")), ConfigError);
}

namespace {

// Single 25-sample 1500 W burst in 300 samples of otherwise silent mains.
SceneData burst_scene() {
    SyntheticScene scene;
    SyntheticApplianceSpec spec;
    spec.name = "toy";
    spec.on_power_mean = 1500.0;
    spec.on_duration_mean = 25.0;
    spec.activations_per_day = 48.0;  // exactly one activation at T=300, 6 s
    scene.appliances = {spec};
    scene.unknown.enabled = false;
    scene.noise_std = 0.0;
    scene.length = 300;
    scene.seed = 33;
    return gen_mains(scene);
}

}  // namespace

TEST_CASE("the perturbation experiment runs its six canonical cases") {
    const Model m = toy_model();
    const SceneData data = burst_scene();
    REQUIRE(data.activations[0].size() == 1);

    const PerturbationReport rep = perturbation_experiment(m, data, 0, 0, 0);
    REQUIRE(rep.cases.size() == 6);
    const std::vector<std::string> names{"original", "remove",   "scale2",
                                         "scale0.5", "stretch2", "no_activation"};
    for (std::size_t i = 0; i < 6; ++i) CHECK(rep.cases[i].name == names[i]);
    const Activation& act = data.activations[0][0];
    CHECK(rep.window_midpoint == act.start + act.duration / 2);

    // Noise-free single-appliance scene: removing the appliance leaves the
    // same silence as a window that never saw it.
    CHECK(rep.cases[1].grid.values == rep.cases[5].grid.values);
    CHECK(rep.cases[1].midpoint_watts == rep.cases[5].midpoint_watts);
    for (const PerturbationCase& c : rep.cases) {
        CHECK(c.grid.filters == 2);
        CHECK(c.grid.positions == 9);
        CHECK_FALSE(c.grid.provenance.empty());
    }
}

TEST_CASE("experiment contracts: head, indices, edges, missing OFF windows") {
    const SceneData data = burst_scene();
    CHECK_THROWS_AS(perturbation_experiment(toy_model(HeadKind::seq), data, 0, 0, 0),
                    ConfigError);
    CHECK_THROWS_AS(perturbation_experiment(toy_model(), data, 1, 0, 0), ConfigError);
    CHECK_THROWS_AS(perturbation_experiment(toy_model(), data, 0, 5, 0), PerturbationError);

    SceneData edgy;
    edgy.mains = TimeSeries{0, 6, std::vector<double>(30, 100.0), {}};
    edgy.truth = {TimeSeries{0, 6, std::vector<double>(30, 0.0), {}}};
    edgy.unknown = TimeSeries{0, 6, std::vector<double>(30, 0.0), {}};
    for (std::size_t i = 0; i < 4; ++i) edgy.truth[0].values[i] = 100.0;
    edgy.activations = {{Activation{0, 4, 100.0}}};  // midpoint 2 < floor(W/2)
    CHECK_THROWS_AS(perturbation_experiment(toy_model(), edgy, 0, 0, 0), PerturbationError);

    SceneData busy;
    busy.mains = TimeSeries{0, 6, std::vector<double>(40, 700.0), {}};
    busy.truth = {TimeSeries{0, 6, std::vector<double>(40, 700.0), {}}};
    busy.unknown = TimeSeries{0, 6, std::vector<double>(40, 0.0), {}};
    busy.activations = {{Activation{10, 20, 700.0}}};  // never OFF anywhere
    CHECK_THROWS_AS(perturbation_experiment(toy_model(), busy, 0, 0, 0), PerturbationError);
}

TEST_CASE("saved reports land as six grid pairs plus a summary") {
    TempDir tmp;
    const Model m = toy_model();
    const SceneData data = burst_scene();
    const PerturbationReport rep = perturbation_experiment(m, data, 0, 0, 0);
    const std::string dir = tmp.base("study");
    save_perturbation_report(rep, dir);

    for (const PerturbationCase& c : rep.cases) {
        const fs::path txt = fs::path(dir) / (c.name + ".txt");
        CHECK(fs::exists(txt));
        CHECK(fs::exists(fs::path(dir) / (c.name + ".pgm")));
        CHECK(parse_grid(txt.string()).values == c.grid.values);
    }
    std::ifstream in(fs::path(dir) / "summary.txt");
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(all.find("appliance toy") != std::string::npos);
    CHECK(all.find("midpoint_watts_original ") != std::string::npos);
    CHECK(all.find("midpoint_watts_no_activation ") != std::string::npos);
}
