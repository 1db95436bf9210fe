#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nilm/model.hpp"
#include "nilm/synth.hpp"

namespace nilm {

// Post-activation outputs of one conv layer for one input window.
struct FeatureMapGrid {
    std::size_t layer_index = 0;  // chain index of the conv layer
    std::size_t filters = 0;
    std::size_t positions = 0;
    std::vector<double> values;  // row-major [filters, positions]
    std::string provenance;      // free-form: window origin / perturbation kind

    double at(std::size_t f, std::size_t p) const { return values[f * positions + p]; }
};

// Runs the window (raw Watts; standardized internally) through the model and
// records the named conv layer's post-activation output.
FeatureMapGrid feature_maps(const Model& model, const std::vector<double>& window_watts,
                            std::size_t layer_index);

// Chain index of the last conv layer (the default inspection target).
std::size_t last_conv_layer(const Model& model);

// Destandardized, clamped midpoint prediction for one raw window (point head).
double midpoint_prediction(const Model& model, const std::vector<double>& window_watts);

// Writes `<base>.txt` (header `filters positions`, then row-major values,
// space-delimited) and `<base>.pgm` (binary P5, row = filter, min-max scaled).
// Returns the two paths.
std::pair<std::string, std::string> export_heatmap(const FeatureMapGrid& grid,
                                                   const std::string& base);

FeatureMapGrid parse_grid(const std::string& txt_path);

// One perturbation case of the six-panel study.
struct PerturbationCase {
    std::string name;  // original | remove | scale2 | scale0.5 | stretch2 | no_activation
    FeatureMapGrid grid;
    double midpoint_watts = 0.0;
};

struct PerturbationReport {
    std::string appliance;
    std::size_t window_midpoint = 0;  // sample index the window centers on
    std::vector<PerturbationCase> cases;  // exactly 6
};

// Runs the six cases for the activation window of `activation_index` of
// appliance `appliance_index` in the scene. The no-activation case reuses the
// nearest all-OFF window. Point-head models only.
PerturbationReport perturbation_experiment(const Model& model, const SceneData& data,
                                           std::size_t appliance_index,
                                           std::size_t activation_index,
                                           std::size_t layer_index);

// Grids as `<dir>/<case>.txt/.pgm` plus `<dir>/summary.txt` kv lines.
void save_perturbation_report(const PerturbationReport& report, const std::string& dir);

}  // namespace nilm
