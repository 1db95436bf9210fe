#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nilm/common.hpp"
#include "nilm/tensor.hpp"

namespace nilm {

enum class LayerKind { conv1d, dense, relu, output_linear };

const char* layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

// One layer of the chain. Convolutions are stride-1 with same padding; the
// trailing output_linear layer is appended by the head, not listed in trunks.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int filters = 0;  // conv1d
    int width = 0;    // conv1d kernel width
    int units = 0;    // dense / output_linear

    static LayerSpec conv(int filters, int width) { return {LayerKind::conv1d, filters, width, 0}; }
    static LayerSpec relu() { return {LayerKind::relu, 0, 0, 0}; }
    static LayerSpec dense(int units) { return {LayerKind::dense, 0, 0, units}; }
};

enum class HeadKind { point, seq };

const char* head_kind_name(HeadKind kind);
HeadKind head_kind_from_name(const std::string& name);

// Mirrors the structured config file. The output head is derived from `head`
// (width 1 for point, W for seq); the loss is the unit-variance Gaussian
// negative log likelihood, i.e. mean squared error up to a constant.
struct NetworkConfig {
    int window_length = 599;
    std::vector<LayerSpec> trunk;
    HeadKind head = HeadKind::point;
    std::uint64_t seed = 0;

    // Five conv blocks, one wide dense layer. Sized for GPU-scale runs.
    static NetworkConfig standard(int window_length, HeadKind head, std::uint64_t seed);
    // Small trunk that trains in seconds on one CPU core.
    static NetworkConfig desk(int window_length, HeadKind head, std::uint64_t seed);

    std::string to_json() const;
    static NetworkConfig from_json(const std::string& text);
    std::uint64_t digest() const;  // over the canonical JSON form
};

// Named view into the flat parameter vector.
struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    std::vector<std::size_t> shape;
    std::size_t size = 0;
};

// Scratch for one example's forward/backward pass. Reusable across calls;
// one per worker when batches run data-parallel.
struct Workspace {
    std::vector<std::vector<double>> acts;      // acts[i]: input of layer i; back: output
    std::vector<std::vector<double>> grads;     // same layout, backward pass
    std::vector<std::vector<double>> padded;    // per conv layer: zero-padded input
    std::vector<std::vector<double>> padded_g;  // per conv layer: gradient wrt padded input
};

// Feedforward chain with a flat parameter store. Deterministic seeded
// initialization; forward/backward operate on one example at a time.
class Network {
public:
    // Default: bare linear model on the default window (placeholder value
    // for containers; real models always come from an explicit config).
    Network() : Network(NetworkConfig{}) {}
    explicit Network(const NetworkConfig& config);

    const NetworkConfig& config() const { return config_; }
    const std::vector<LayerSpec>& chain() const { return chain_; }
    const std::vector<ParamBlock>& blocks() const { return blocks_; }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::size_t param_count() const { return params_.size(); }

    int input_length() const { return config_.window_length; }
    int output_length() const { return output_length_; }

    // (channels, length) of the value entering layer i; flattened dense
    // inputs report (1, n).
    std::pair<int, int> boundary_dims(std::size_t i) const { return dims_.at(i); }

    Workspace make_workspace() const;

    // Forward pass for one window of length W. Activations stay in ws for a
    // following backward() or feature-map read. Returns the head output.
    const std::vector<double>& forward(const double* window, Workspace& ws) const;

    // Backward pass for the example most recently run through ws. Adds
    // parameter gradients into grad (flat, param_count entries).
    void backward(const double* dloss_dout, Workspace& ws, double* grad) const;

    // Post-activation output of the conv layer at chain index `layer`,
    // computed by forward(); shape (filters, length).
    Tensor conv_feature_map(std::size_t layer, const Workspace& ws) const;
    std::vector<std::size_t> conv_layer_indices() const;

    // Parameters of the layers shared by both heads (everything before the
    // output layer); used to confirm two builds share one trunk.
    std::uint64_t trunk_checksum() const;
    std::size_t trunk_param_count() const { return trunk_param_count_; }

    void require_finite_params() const;

private:
    void build_chain();
    void init_params();

    NetworkConfig config_;
    std::vector<LayerSpec> chain_;       // trunk + output head
    std::vector<ParamBlock> blocks_;     // two per parameterized layer
    std::vector<std::pair<int, int>> dims_;  // boundary per layer, plus final output
    std::vector<int> block_of_layer_;    // first block index per layer, -1 if none
    std::vector<double> params_;
    std::size_t trunk_param_count_ = 0;
    int output_length_ = 0;
};

// Standalone forward ops. `input` is [len] or [channels, len]; `kernels` is
// [filters, width] or [filters, channels, width]. Same padding keeps length.
Tensor conv1d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias);

// output = weights * input + bias, with weights [m, n] and input [n].
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

namespace detail {

// y[f][i] = b[f] + sum_c sum_k w[f][c][k] * xp[c][i + K - 1 - k]
// xp is x zero-padded with K/2 on the left and (K-1)/2 on the right.
void conv1d_same(const double* x, int c_in, int len, const double* w, int filters, int width,
                 const double* bias, double* padded_scratch, double* y);

void dense(const double* x, int n, const double* w, int m, const double* bias, double* y);

}  // namespace detail

}  // namespace nilm
