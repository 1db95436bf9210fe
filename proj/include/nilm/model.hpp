#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nilm/network.hpp"
#include "nilm/optimizer.hpp"
#include "nilm/timeseries.hpp"
#include "nilm/windowing.hpp"

namespace nilm {

// Everything a checkpoint carries besides the weights.
struct ModelMeta {
    ApplianceProfile profile;  // target appliance, incl. normalization pair
    NormStats mains_stats;     // computed over the training mains
    int epochs_seen = 0;
};

struct Model {
    Network net;
    ModelMeta meta;
};

// Unit-variance Gaussian negative log likelihood up to a constant:
// mean over the batch of 0.5 * (pred - target)^2.
double loss_point(const Tensor& pred, const Tensor& target);

// Same, averaged over batch and window positions.
double loss_seq(const Tensor& pred, const Tensor& target);

// Forward/backward over a batch with reusable per-worker scratch. Gradient
// reduction happens in fixed chunk order, so results are reproducible for a
// fixed seed and worker count.
class BatchEvaluator {
public:
    explicit BatchEvaluator(const Network& net);

    // Mean per-element loss of the batch (forward only).
    double loss(const WindowBatch& batch);

    // Loss plus dL/dparams into grads (overwritten, sized to param_count).
    double loss_and_gradients(const WindowBatch& batch, std::vector<double>& grads,
                              double loss_scale = 1.0);

    // Head outputs for every row of the batch, row-major [B, out].
    Tensor forward_all(const WindowBatch& batch);

private:
    const Network& net_;
    std::vector<Workspace> workspaces_;
    std::vector<std::vector<double>> grad_parts_;
    std::vector<double> loss_parts_;
};

// dL/dp for every parameter under the loss implied by the target shape.
// Scaling the loss by a constant scales every gradient by the same constant.
std::vector<double> backprop_gradients(const Network& net, const WindowBatch& batch,
                                       double loss_scale = 1.0, double* loss_out = nullptr);

struct TrainOptions {
    int epochs = 50;
    std::size_t batch_size = 512;
    int patience = 5;        // early stop after this many epochs without val improvement
    double learning_rate = 1e-3;
};

struct TrainReport {
    std::vector<double> train_loss;  // one entry per epoch run
    std::vector<double> val_loss;
    int best_epoch = -1;             // index into the loss arrays
    double wall_time_seconds = 0.0;  // not serialized: artifacts stay bit-reproducible

    std::string to_json() const;  // wall time excluded
};

// Trains a fresh network from config on the given windows and returns the
// parameters from the best validation epoch. Deterministic for a fixed seed
// and worker count. Throws TrainingError naming epoch/batch on divergence.
Model train(const NetworkConfig& config, const WindowBatch& train_windows,
            const WindowBatch& val_windows, const TrainOptions& options, const ModelMeta& meta,
            TrainReport* report = nullptr);

// Temporal split helper: last `fraction` of rows become validation.
std::pair<WindowBatch, WindowBatch> split_validation(const WindowBatch& batch,
                                                     double fraction = 0.1);

// Versioned binary checkpoint: magic, version, config digest, config, model
// metadata, then named parameter blocks with shapes (little-endian f64),
// closed by a content hash. load(save(m)) is bit-identical.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

// Point vs seq head trained on one trunk/seed and scored on the same held-out
// midpoints: per unpadded test window, the point head's scalar and the seq
// head's midpoint column are each squared against the true midpoint value.
// MSE is in standardized target units (identical scaling for both heads).
struct HeadComparison {
    double point_midpoint_mse = 0.0;
    double seq_midpoint_mse = 0.0;
    bool trunks_matched_at_init = false;
    Model point_model;
    Model seq_model;
    TrainReport point_report;
    TrainReport seq_report;

    std::string to_kv() const;
};

HeadComparison compare_heads(const NetworkConfig& base_config, const AlignedPair& train_pair,
                             const AlignedPair& test_pair, const ApplianceProfile& profile,
                             const NormStats& mains_stats, const TrainOptions& options);

}  // namespace nilm
