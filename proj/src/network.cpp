#include "nilm/network.hpp"

#include <algorithm>
#include <cstring>

#include <json.hpp>

namespace nilm {

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv1d: return "conv1d";
        case LayerKind::dense: return "dense";
        case LayerKind::relu: return "relu";
        case LayerKind::output_linear: return "output-linear";
    }
    return "?";
}

LayerKind layer_kind_from_name(const std::string& name) {
    if (name == "conv1d") return LayerKind::conv1d;
    if (name == "dense") return LayerKind::dense;
    if (name == "relu") return LayerKind::relu;
    if (name == "output-linear") return LayerKind::output_linear;
    throw ConfigError("unknown layer kind '" + name + "'");
}

const char* head_kind_name(HeadKind kind) {
    return kind == HeadKind::point ? "point" : "seq";
}

HeadKind head_kind_from_name(const std::string& name) {
    if (name == "point") return HeadKind::point;
    if (name == "seq") return HeadKind::seq;
    throw ConfigError("unknown head '" + name + "' (expected point or seq)");
}

NetworkConfig NetworkConfig::standard(int window_length, HeadKind head, std::uint64_t seed) {
    NetworkConfig cfg;
    cfg.window_length = window_length;
    cfg.head = head;
    cfg.seed = seed;
    cfg.trunk = {
        LayerSpec::conv(30, 10), LayerSpec::relu(),
        LayerSpec::conv(30, 8),  LayerSpec::relu(),
        LayerSpec::conv(40, 6),  LayerSpec::relu(),
        LayerSpec::conv(50, 5),  LayerSpec::relu(),
        LayerSpec::conv(50, 5),  LayerSpec::relu(),
        LayerSpec::dense(1024),  LayerSpec::relu(),
    };
    return cfg;
}

NetworkConfig NetworkConfig::desk(int window_length, HeadKind head, std::uint64_t seed) {
    NetworkConfig cfg;
    cfg.window_length = window_length;
    cfg.head = head;
    cfg.seed = seed;
    cfg.trunk = {
        LayerSpec::conv(8, 9),  LayerSpec::relu(),
        LayerSpec::conv(8, 7),  LayerSpec::relu(),
        LayerSpec::conv(12, 5), LayerSpec::relu(),
        LayerSpec::dense(64),   LayerSpec::relu(),
    };
    return cfg;
}

std::string NetworkConfig::to_json() const {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : trunk) {
        nlohmann::json j{{"kind", layer_kind_name(l.kind)}};
        if (l.kind == LayerKind::conv1d) {
            j["filters"] = l.filters;
            j["width"] = l.width;
        } else if (l.kind == LayerKind::dense || l.kind == LayerKind::output_linear) {
            j["units"] = l.units;
        }
        layers.push_back(j);
    }
    nlohmann::json j{{"window_length", window_length},
                     {"trunk", layers},
                     {"head", head_kind_name(head)},
                     {"seed", seed},
                     {"loss", "gaussian-nll-unit-variance"}};
    return j.dump();
}

NetworkConfig NetworkConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed network config: ") + e.what());
    }
    NetworkConfig cfg;
    try {
        cfg.window_length = j.at("window_length").get<int>();
        cfg.head = head_kind_from_name(j.at("head").get<std::string>());
        cfg.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("loss") && j["loss"] != "gaussian-nll-unit-variance")
            throw ConfigError("unsupported loss '" + j["loss"].get<std::string>() + "'");
        for (const auto& l : j.at("trunk")) {
            LayerSpec spec;
            spec.kind = layer_kind_from_name(l.at("kind").get<std::string>());
            spec.filters = l.value("filters", 0);
            spec.width = l.value("width", 0);
            spec.units = l.value("units", 0);
            cfg.trunk.push_back(spec);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed network config: ") + e.what());
    }
    return cfg;
}

std::uint64_t NetworkConfig::digest() const {
    const std::string canon = to_json();
    return fnv1a64(canon.data(), canon.size());
}

namespace detail {

void conv1d_same(const double* x, int c_in, int len, const double* w, int filters, int width,
                 const double* bias, double* padded_scratch, double* y) {
    const int pad_left = width / 2;
    const int padded_len = len + width - 1;
    for (int c = 0; c < c_in; ++c) {
        double* row = padded_scratch + static_cast<std::size_t>(c) * padded_len;
        std::fill(row, row + pad_left, 0.0);
        std::memcpy(row + pad_left, x + static_cast<std::size_t>(c) * len,
                    sizeof(double) * static_cast<std::size_t>(len));
        std::fill(row + pad_left + len, row + padded_len, 0.0);
    }
    for (int f = 0; f < filters; ++f) {
        double* out = y + static_cast<std::size_t>(f) * len;
        std::fill(out, out + len, bias[f]);
        for (int c = 0; c < c_in; ++c) {
            const double* row = padded_scratch + static_cast<std::size_t>(c) * padded_len;
            const double* wk = w + (static_cast<std::size_t>(f) * c_in + c) * width;
            for (int k = 0; k < width; ++k) {
                const double wv = wk[k];
                const double* src = row + (width - 1 - k);
                for (int i = 0; i < len; ++i) out[i] += wv * src[i];
            }
        }
    }
}

void dense(const double* x, int n, const double* w, int m, const double* bias, double* y) {
    for (int j = 0; j < m; ++j) {
        const double* row = w + static_cast<std::size_t>(j) * n;
        double acc = bias[j];
        for (int i = 0; i < n; ++i) acc += row[i] * x[i];
        y[j] = acc;
    }
}

// Gradient counterparts. g is dL/dy for the layer's output.

void conv1d_same_backward(const double* g, const double* padded_x, const double* w, int c_in,
                          int len, int filters, int width, double* grad_w, double* grad_b,
                          double* padded_gx /* null to skip input gradient */) {
    const int padded_len = len + width - 1;
    if (padded_gx)
        std::fill(padded_gx, padded_gx + static_cast<std::size_t>(c_in) * padded_len, 0.0);
    for (int f = 0; f < filters; ++f) {
        const double* gf = g + static_cast<std::size_t>(f) * len;
        double gb = 0.0;
        for (int i = 0; i < len; ++i) gb += gf[i];
        grad_b[f] += gb;
        for (int c = 0; c < c_in; ++c) {
            const double* row = padded_x + static_cast<std::size_t>(c) * padded_len;
            const std::size_t woff = (static_cast<std::size_t>(f) * c_in + c) * width;
            for (int k = 0; k < width; ++k) {
                const double* src = row + (width - 1 - k);
                double acc = 0.0;
                for (int i = 0; i < len; ++i) acc += gf[i] * src[i];
                grad_w[woff + k] += acc;
            }
            if (padded_gx) {
                double* gx = padded_gx + static_cast<std::size_t>(c) * padded_len;
                for (int k = 0; k < width; ++k) {
                    const double wv = w[woff + k];
                    double* dst = gx + (width - 1 - k);
                    for (int i = 0; i < len; ++i) dst[i] += wv * gf[i];
                }
            }
        }
    }
}

void dense_backward(const double* g, const double* x, const double* w, int n, int m,
                    double* grad_w, double* grad_b, double* gx /* null to skip */) {
    if (gx) std::fill(gx, gx + n, 0.0);
    for (int j = 0; j < m; ++j) {
        const double gj = g[j];
        grad_b[j] += gj;
        double* gw = grad_w + static_cast<std::size_t>(j) * n;
        for (int i = 0; i < n; ++i) gw[i] += gj * x[i];
        if (gx) {
            const double* row = w + static_cast<std::size_t>(j) * n;
            for (int i = 0; i < n; ++i) gx[i] += gj * row[i];
        }
    }
}

}  // namespace detail

Network::Network(const NetworkConfig& config) : config_(config) {
    if (config_.window_length < 1) throw ConfigError("network: window length must be >= 1");
    build_chain();
    init_params();
}

void Network::build_chain() {
    chain_ = config_.trunk;
    LayerSpec head;
    head.kind = LayerKind::output_linear;
    head.units = config_.head == HeadKind::point ? 1 : config_.window_length;
    chain_.push_back(head);

    int channels = 1;
    int length = config_.window_length;
    bool flattened = false;
    dims_.clear();
    blocks_.clear();
    block_of_layer_.assign(chain_.size(), -1);
    std::size_t offset = 0;

    for (std::size_t i = 0; i < chain_.size(); ++i) {
        dims_.emplace_back(channels, length);
        const LayerSpec& l = chain_[i];
        const std::string tag = "layer" + std::to_string(i);
        switch (l.kind) {
            case LayerKind::conv1d: {
                if (flattened)
                    throw ConfigError(tag + ": conv1d after a dense layer");
                if (l.filters < 1) throw ConfigError(tag + ": filter count must be >= 1");
                if (l.width < 1 || l.width > length)
                    throw ConfigError(tag + ": kernel width must be in [1, input length]");
                block_of_layer_[i] = static_cast<int>(blocks_.size());
                const std::size_t wsize = static_cast<std::size_t>(l.filters) * channels * l.width;
                blocks_.push_back({tag + ".kernels", offset,
                                   {static_cast<std::size_t>(l.filters),
                                    static_cast<std::size_t>(channels),
                                    static_cast<std::size_t>(l.width)},
                                   wsize});
                offset += wsize;
                blocks_.push_back(
                    {tag + ".bias", offset, {static_cast<std::size_t>(l.filters)},
                     static_cast<std::size_t>(l.filters)});
                offset += static_cast<std::size_t>(l.filters);
                channels = l.filters;
                break;
            }
            case LayerKind::relu:
                break;
            case LayerKind::dense:
            case LayerKind::output_linear: {
                if (l.units < 1) throw ConfigError(tag + ": unit count must be >= 1");
                const int in = channels * length;
                block_of_layer_[i] = static_cast<int>(blocks_.size());
                const std::size_t wsize = static_cast<std::size_t>(l.units) * in;
                blocks_.push_back({tag + ".weights", offset,
                                   {static_cast<std::size_t>(l.units), static_cast<std::size_t>(in)},
                                   wsize});
                offset += wsize;
                blocks_.push_back(
                    {tag + ".bias", offset, {static_cast<std::size_t>(l.units)},
                     static_cast<std::size_t>(l.units)});
                offset += static_cast<std::size_t>(l.units);
                channels = 1;
                length = l.units;
                flattened = true;
                break;
            }
        }
        if (i + 1 == chain_.size()) {
            // head must be the only output_linear layer
            if (l.kind != LayerKind::output_linear)
                throw ConfigError("network: chain must end in the output head");
        } else if (l.kind == LayerKind::output_linear) {
            throw ConfigError(tag + ": output-linear before the end of the chain");
        }
    }
    dims_.emplace_back(channels, length);
    output_length_ = length;
    params_.assign(offset, 0.0);

    const int head_block = block_of_layer_.back();
    trunk_param_count_ = blocks_[static_cast<std::size_t>(head_block)].offset;
}

void Network::init_params() {
    Rng rng(config_.seed);
    for (std::size_t i = 0; i < chain_.size(); ++i) {
        const int bi = block_of_layer_[i];
        if (bi < 0) continue;
        const LayerSpec& l = chain_[i];
        const auto [channels, length] = dims_[i];
        double fan_in = 0.0, fan_out = 0.0;
        if (l.kind == LayerKind::conv1d) {
            fan_in = static_cast<double>(channels) * l.width;
            fan_out = static_cast<double>(l.filters) * l.width;
        } else {
            fan_in = static_cast<double>(channels) * length;
            fan_out = static_cast<double>(l.units);
        }
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        const ParamBlock& weights = blocks_[static_cast<std::size_t>(bi)];
        for (std::size_t k = 0; k < weights.size; ++k)
            params_[weights.offset + k] = rng.uniform(-limit, limit);
        // biases stay zero
    }
}

Workspace Network::make_workspace() const {
    Workspace ws;
    ws.acts.resize(dims_.size());
    ws.grads.resize(dims_.size());
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        const std::size_t n = static_cast<std::size_t>(dims_[i].first) * dims_[i].second;
        ws.acts[i].assign(n, 0.0);
        ws.grads[i].assign(n, 0.0);
    }
    ws.padded.resize(chain_.size());
    ws.padded_g.resize(chain_.size());
    for (std::size_t i = 0; i < chain_.size(); ++i) {
        if (chain_[i].kind != LayerKind::conv1d) continue;
        const auto [channels, length] = dims_[i];
        const std::size_t n = static_cast<std::size_t>(channels) * (length + chain_[i].width - 1);
        ws.padded[i].assign(n, 0.0);
        ws.padded_g[i].assign(n, 0.0);
    }
    return ws;
}

const std::vector<double>& Network::forward(const double* window, Workspace& ws) const {
    std::copy(window, window + config_.window_length, ws.acts[0].begin());
    for (std::size_t i = 0; i < chain_.size(); ++i) {
        const LayerSpec& l = chain_[i];
        const auto [channels, length] = dims_[i];
        const double* x = ws.acts[i].data();
        double* y = ws.acts[i + 1].data();
        switch (l.kind) {
            case LayerKind::conv1d: {
                const int bi = block_of_layer_[i];
                const double* w = params_.data() + blocks_[bi].offset;
                const double* b = params_.data() + blocks_[bi + 1].offset;
                detail::conv1d_same(x, channels, length, w, l.filters, l.width, b,
                                    ws.padded[i].data(), y);
                break;
            }
            case LayerKind::relu: {
                const std::size_t n = ws.acts[i].size();
                for (std::size_t k = 0; k < n; ++k) y[k] = x[k] > 0.0 ? x[k] : 0.0;
                break;
            }
            case LayerKind::dense:
            case LayerKind::output_linear: {
                const int bi = block_of_layer_[i];
                const double* w = params_.data() + blocks_[bi].offset;
                const double* b = params_.data() + blocks_[bi + 1].offset;
                detail::dense(x, channels * length, w, l.units, b, y);
                break;
            }
        }
    }
    return ws.acts.back();
}

void Network::backward(const double* dloss_dout, Workspace& ws, double* grad) const {
    std::copy(dloss_dout, dloss_dout + output_length_, ws.grads.back().begin());
    for (std::size_t ii = chain_.size(); ii-- > 0;) {
        const LayerSpec& l = chain_[ii];
        const auto [channels, length] = dims_[ii];
        const double* g = ws.grads[ii + 1].data();
        double* gx = ii == 0 ? nullptr : ws.grads[ii].data();
        switch (l.kind) {
            case LayerKind::conv1d: {
                const int bi = block_of_layer_[ii];
                const double* w = params_.data() + blocks_[bi].offset;
                double* gw = grad + blocks_[bi].offset;
                double* gb = grad + blocks_[bi + 1].offset;
                detail::conv1d_same_backward(g, ws.padded[ii].data(), w, channels, length,
                                             l.filters, l.width, gw, gb,
                                             gx ? ws.padded_g[ii].data() : nullptr);
                if (gx) {
                    const int pad_left = l.width / 2;
                    const int padded_len = length + l.width - 1;
                    for (int c = 0; c < channels; ++c) {
                        const double* src =
                            ws.padded_g[ii].data() + static_cast<std::size_t>(c) * padded_len +
                            pad_left;
                        std::copy(src, src + length,
                                  gx + static_cast<std::size_t>(c) * length);
                    }
                }
                break;
            }
            case LayerKind::relu: {
                if (!gx) break;
                const double* x = ws.acts[ii].data();
                const std::size_t n = ws.acts[ii].size();
                for (std::size_t k = 0; k < n; ++k) gx[k] = x[k] > 0.0 ? g[k] : 0.0;
                break;
            }
            case LayerKind::dense:
            case LayerKind::output_linear: {
                const int bi = block_of_layer_[ii];
                const double* w = params_.data() + blocks_[bi].offset;
                double* gw = grad + blocks_[bi].offset;
                double* gb = grad + blocks_[bi + 1].offset;
                detail::dense_backward(g, ws.acts[ii].data(), w, channels * length, l.units, gw,
                                       gb, gx);
                break;
            }
        }
    }
}

Tensor Network::conv_feature_map(std::size_t layer, const Workspace& ws) const {
    if (layer >= chain_.size() || chain_[layer].kind != LayerKind::conv1d)
        throw ConfigError("feature maps: layer " + std::to_string(layer) +
                          " is not a conv1d layer");
    // post-activation: read past an immediately following relu
    std::size_t boundary = layer + 1;
    if (boundary < chain_.size() && chain_[boundary].kind == LayerKind::relu) ++boundary;
    const auto [channels, length] = dims_[boundary];
    Tensor grid({static_cast<std::size_t>(channels), static_cast<std::size_t>(length)});
    std::copy(ws.acts[boundary].begin(), ws.acts[boundary].end(), grid.values().begin());
    return grid;
}

std::vector<std::size_t> Network::conv_layer_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < chain_.size(); ++i)
        if (chain_[i].kind == LayerKind::conv1d) out.push_back(i);
    return out;
}

std::uint64_t Network::trunk_checksum() const {
    return fnv1a64(params_.data(), trunk_param_count_ * sizeof(double));
}

void Network::require_finite_params() const {
    for (std::size_t i = 0; i < chain_.size(); ++i) {
        const int bi = block_of_layer_[i];
        if (bi < 0) continue;
        for (int b = bi; b < bi + 2; ++b) {
            const ParamBlock& blk = blocks_[static_cast<std::size_t>(b)];
            for (std::size_t k = 0; k < blk.size; ++k)
                if (!std::isfinite(params_[blk.offset + k]))
                    throw NumericError("layer " + std::to_string(i) + " (" +
                                       layer_kind_name(chain_[i].kind) +
                                       "): non-finite parameters");
        }
    }
}

Tensor conv1d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    if (input.rank() != 1 && input.rank() != 2)
        throw ConfigError("conv1d_forward: input must be [len] or [channels, len]");
    const int c_in = input.rank() == 2 ? static_cast<int>(input.dim(0)) : 1;
    const int len = static_cast<int>(input.rank() == 2 ? input.dim(1) : input.dim(0));
    int filters = 0, width = 0;
    if (kernels.rank() == 2) {
        filters = static_cast<int>(kernels.dim(0));
        width = static_cast<int>(kernels.dim(1));
        if (c_in != 1)
            throw ConfigError("conv1d_forward: rank-2 kernels require single-channel input");
    } else if (kernels.rank() == 3) {
        filters = static_cast<int>(kernels.dim(0));
        width = static_cast<int>(kernels.dim(2));
        if (static_cast<int>(kernels.dim(1)) != c_in)
            throw ConfigError("conv1d_forward: kernel channel count does not match input");
    } else {
        throw ConfigError("conv1d_forward: kernels must be rank 2 or 3");
    }
    if (bias.rank() != 1 || static_cast<int>(bias.dim(0)) != filters)
        throw ConfigError("conv1d_forward: bias must have one entry per filter");
    if (width < 1 || width > len)
        throw ConfigError("conv1d_forward: kernel width must be in [1, input length]");
    input.require_finite("conv1d_forward input");
    kernels.require_finite("conv1d_forward kernels");
    bias.require_finite("conv1d_forward bias");

    std::vector<double> padded(static_cast<std::size_t>(c_in) * (len + width - 1));
    Tensor out({static_cast<std::size_t>(filters), static_cast<std::size_t>(len)});
    detail::conv1d_same(input.data(), c_in, len, kernels.data(), filters, width, bias.data(),
                        padded.data(), out.data());
    return out;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    if (input.rank() != 1) throw ConfigError("dense_forward: input must be rank 1");
    if (weights.rank() != 2 || weights.dim(1) != input.dim(0))
        throw ConfigError("dense_forward: weights must be [m, n] with n matching the input");
    if (bias.rank() != 1 || bias.dim(0) != weights.dim(0))
        throw ConfigError("dense_forward: bias must have one entry per output");
    input.require_finite("dense_forward input");
    weights.require_finite("dense_forward weights");
    bias.require_finite("dense_forward bias");
    Tensor out({weights.dim(0)});
    detail::dense(input.data(), static_cast<int>(input.dim(0)), weights.data(),
                  static_cast<int>(weights.dim(0)), bias.data(), out.data());
    return out;
}

}  // namespace nilm
