#include "nilm/introspect.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nilm/data_io.hpp"

namespace nilm {

namespace {

std::vector<double> standardize_window(const Model& model, const std::vector<double>& watts) {
    const int W = model.net.config().window_length;
    if (watts.size() != static_cast<std::size_t>(W))
        throw ConfigError("window length " + std::to_string(watts.size()) +
                          " does not match the model's W=" + std::to_string(W));
    const NormStats& st = model.meta.mains_stats;
    std::vector<double> z(watts.size());
    for (std::size_t i = 0; i < watts.size(); ++i) z[i] = (watts[i] - st.mean) / st.std;
    return z;
}

}  // namespace

FeatureMapGrid feature_maps(const Model& model, const std::vector<double>& window_watts,
                            std::size_t layer_index) {
    const std::vector<double> z = standardize_window(model, window_watts);
    Workspace ws = model.net.make_workspace();
    model.net.forward(z.data(), ws);
    const Tensor t = model.net.conv_feature_map(layer_index, ws);
    FeatureMapGrid grid;
    grid.layer_index = layer_index;
    grid.filters = t.dim(0);
    grid.positions = t.dim(1);
    grid.values = t.values();
    return grid;
}

std::size_t last_conv_layer(const Model& model) {
    const auto indices = model.net.conv_layer_indices();
    if (indices.empty()) throw ConfigError("model has no conv layers");
    return indices.back();
}

double midpoint_prediction(const Model& model, const std::vector<double>& window_watts) {
    if (model.net.config().head != HeadKind::point)
        throw ConfigError("midpoint_prediction: point-head model required");
    const std::vector<double> z = standardize_window(model, window_watts);
    Workspace ws = model.net.make_workspace();
    const auto& out = model.net.forward(z.data(), ws);
    const ApplianceProfile& prof = model.meta.profile;
    const double watts = prof.norm_mean + prof.norm_std * out[0];
    return std::clamp(watts, 0.0, prof.max_power);
}

std::pair<std::string, std::string> export_heatmap(const FeatureMapGrid& grid,
                                                   const std::string& base) {
    if (grid.filters == 0 || grid.positions == 0 ||
        grid.values.size() != grid.filters * grid.positions)
        throw ConfigError("export_heatmap: inconsistent grid dimensions");

    const std::string txt_path = base + ".txt";
    {
        std::ofstream out(txt_path, std::ios::trunc);
        if (!out) throw IoError("cannot open grid file for writing: " + txt_path);
        out << grid.filters << ' ' << grid.positions << '\n';
        out.precision(17);
        for (std::size_t f = 0; f < grid.filters; ++f) {
            for (std::size_t p = 0; p < grid.positions; ++p) {
                if (p) out << ' ';
                out << grid.at(f, p);
            }
            out << '\n';
        }
        if (!out) throw IoError("failed writing grid file: " + txt_path);
    }

    const std::string pgm_path = base + ".pgm";
    {
        const auto [lo_it, hi_it] = std::minmax_element(grid.values.begin(), grid.values.end());
        const double lo = *lo_it, hi = *hi_it;
        std::ofstream out(pgm_path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open image for writing: " + pgm_path);
        out << "P5\n" << grid.positions << ' ' << grid.filters << "\n255\n";
        std::vector<unsigned char> row(grid.positions);
        for (std::size_t f = 0; f < grid.filters; ++f) {
            for (std::size_t p = 0; p < grid.positions; ++p) {
                const double v = grid.at(f, p);
                row[p] = hi > lo ? static_cast<unsigned char>(
                                       std::lround(255.0 * (v - lo) / (hi - lo)))
                                 : static_cast<unsigned char>(128);
            }
            out.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(row.size()));
        }
        if (!out) throw IoError("failed writing image: " + pgm_path);
    }
    return {txt_path, pgm_path};
}

FeatureMapGrid parse_grid(const std::string& txt_path) {
    std::ifstream in(txt_path);
    if (!in) throw IoError("cannot open grid file: " + txt_path);
    FeatureMapGrid grid;
    if (!(in >> grid.filters >> grid.positions) || grid.filters == 0 || grid.positions == 0)
        throw IoError("malformed grid header in " + txt_path);
    grid.values.resize(grid.filters * grid.positions);
    for (double& v : grid.values)
        if (!(in >> v)) throw IoError("grid file truncated: " + txt_path);
    double extra;
    if (in >> extra) throw IoError("grid file has trailing values: " + txt_path);
    return grid;
}

namespace {

std::vector<double> copy_span(const std::vector<double>& v, std::size_t begin, std::size_t len) {
    return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(begin),
                               v.begin() + static_cast<std::ptrdiff_t>(begin + len));
}

}  // namespace

PerturbationReport perturbation_experiment(const Model& model, const SceneData& data,
                                           std::size_t appliance_index,
                                           std::size_t activation_index,
                                           std::size_t layer_index) {
    if (model.net.config().head != HeadKind::point)
        throw ConfigError("perturbation_experiment: point-head model required");
    if (appliance_index >= data.truth.size())
        throw ConfigError("perturbation_experiment: appliance index out of range");
    const auto& acts = data.activations[appliance_index];
    if (activation_index >= acts.size())
        throw PerturbationError("perturbation_experiment: activation index out of range");

    const std::size_t W = static_cast<std::size_t>(model.net.config().window_length);
    const std::size_t half = W / 2;
    const std::size_t T = data.mains.length();
    const Activation& act = acts[activation_index];
    const std::size_t mid = act.start + act.duration / 2;
    if (mid < half || mid + half >= T)
        throw PerturbationError("perturbation_experiment: activation too close to the series edge");
    const std::size_t start = mid - half;

    const std::vector<double> window = copy_span(data.mains.values, start, W);
    const std::vector<double> truth = copy_span(data.truth[appliance_index].values, start, W);

    PerturbationReport report;
    report.appliance = model.meta.profile.name;
    report.window_midpoint = mid;

    const auto add_case = [&](const std::string& name, const std::vector<double>& w) {
        PerturbationCase c;
        c.name = name;
        c.grid = feature_maps(model, w, layer_index);
        c.grid.provenance = "midpoint=" + std::to_string(mid) + " case=" + name;
        c.midpoint_watts = midpoint_prediction(model, w);
        report.cases.push_back(std::move(c));
    };

    add_case("original", window);
    add_case("remove", perturb_window(window, truth, Perturbation::remove()));
    add_case("scale2", perturb_window(window, truth, Perturbation::scale(2.0)));
    add_case("scale0.5", perturb_window(window, truth, Perturbation::scale(0.5)));
    add_case("stretch2", perturb_window(window, truth, Perturbation::stretch(2.0)));

    // Nearest window with the appliance OFF throughout (other loads may run).
    const std::vector<double>& full_truth = data.truth[appliance_index].values;
    std::size_t off_mid = T;  // sentinel
    for (std::size_t delta = 0; delta + half < T; ++delta) {
        for (const std::size_t m : {mid + delta, mid >= delta ? mid - delta : T}) {
            if (m == T || m < half || m + half >= T) continue;
            bool clear = true;
            for (std::size_t i = m - half; i <= m + half && clear; ++i)
                clear = full_truth[i] <= 0.0;
            if (clear) {
                off_mid = m;
                break;
            }
        }
        if (off_mid != T) break;
    }
    if (off_mid == T)
        throw PerturbationError("perturbation_experiment: no appliance-free window in the scene");
    {
        const std::vector<double> off_window = copy_span(data.mains.values, off_mid - half, W);
        PerturbationCase c;
        c.name = "no_activation";
        c.grid = feature_maps(model, off_window, layer_index);
        c.grid.provenance = "midpoint=" + std::to_string(off_mid) + " case=no_activation";
        c.midpoint_watts = midpoint_prediction(model, off_window);
        report.cases.push_back(std::move(c));
    }
    return report;
}

void save_perturbation_report(const PerturbationReport& report, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ostringstream summary;
    summary << "appliance " << report.appliance << '\n';
    summary << "window_midpoint " << report.window_midpoint << '\n';
    summary.precision(17);
    for (const PerturbationCase& c : report.cases) {
        export_heatmap(c.grid, (std::filesystem::path(dir) / c.name).string());
        summary << "midpoint_watts_" << c.name << ' ' << c.midpoint_watts << '\n';
    }
    const std::string path = (std::filesystem::path(dir) / "summary.txt").string();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open summary for writing: " + path);
    out << summary.str();
    if (!out) throw IoError("failed writing summary: " + path);
}

}  // namespace nilm
