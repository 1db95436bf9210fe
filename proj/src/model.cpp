#include "nilm/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace nilm {

namespace {

double squared_error_mean(const Tensor& pred, const Tensor& target, const char* op) {
    if (pred.shape() != target.shape())
        throw ConfigError(std::string(op) + ": pred/target shape mismatch");
    if (pred.rank() != 2 || pred.dim(0) == 0)
        throw ConfigError(std::string(op) + ": expected a nonempty [B, n] tensor");
    double total = 0.0;
    const auto& p = pred.values();
    const auto& t = target.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        total += 0.5 * d * d;
    }
    return total / static_cast<double>(p.size());
}

}  // namespace

double loss_point(const Tensor& pred, const Tensor& target) {
    const double v = squared_error_mean(pred, target, "loss_point");
    if (pred.dim(1) != 1) throw ConfigError("loss_point: predictions must be [B, 1]");
    return v;
}

double loss_seq(const Tensor& pred, const Tensor& target) {
    return squared_error_mean(pred, target, "loss_seq");
}

BatchEvaluator::BatchEvaluator(const Network& net) : net_(net) {
    const std::size_t workers = static_cast<std::size_t>(worker_count());
    workspaces_.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) workspaces_.push_back(net.make_workspace());
    grad_parts_.assign(workers, {});
    loss_parts_.assign(workers, 0.0);
}

Tensor BatchEvaluator::forward_all(const WindowBatch& batch) {
    const std::size_t rows = batch.count();
    if (rows == 0) throw ConfigError("forward_all: empty batch");
    if (batch.window_length() != net_.input_length())
        throw ConfigError("forward_all: window length does not match the network input");
    const std::size_t out_len = static_cast<std::size_t>(net_.output_length());
    Tensor out({rows, out_len});
    const int W = net_.input_length();
    parallel_chunks(rows, [&](std::size_t ci, std::size_t b, std::size_t e) {
        Workspace& ws = workspaces_[ci];
        for (std::size_t r = b; r < e; ++r) {
            const double* x = batch.inputs.data() + r * static_cast<std::size_t>(W);
            const auto& y = net_.forward(x, ws);
            std::copy(y.begin(), y.end(), out.data() + r * out_len);
        }
    });
    return out;
}

double BatchEvaluator::loss(const WindowBatch& batch) {
    const Tensor pred = forward_all(batch);
    if (batch.targets.shape() != pred.shape())
        throw ConfigError("loss: target shape does not match the network head");
    return squared_error_mean(pred, batch.targets, "loss");
}

double BatchEvaluator::loss_and_gradients(const WindowBatch& batch, std::vector<double>& grads,
                                          double loss_scale) {
    const std::size_t rows = batch.count();
    if (rows == 0) throw ConfigError("loss_and_gradients: empty batch");
    if (batch.window_length() != net_.input_length())
        throw ConfigError("loss_and_gradients: window length does not match the network input");
    const std::size_t out_len = static_cast<std::size_t>(net_.output_length());
    if (batch.targets.rank() != 2 || batch.targets.dim(0) != rows || batch.targets.dim(1) != out_len)
        throw ConfigError("loss_and_gradients: target shape does not match the network head");

    const std::size_t pc = net_.param_count();
    grads.assign(pc, 0.0);
    const std::size_t W = static_cast<std::size_t>(net_.input_length());
    // d(mean loss)/d(pred) = (pred - target) / (rows * out_len), times loss_scale
    const double gscale = loss_scale / (static_cast<double>(rows) * static_cast<double>(out_len));

    const std::size_t used = std::min(workspaces_.size(), rows);
    parallel_chunks(rows, [&](std::size_t ci, std::size_t b, std::size_t e) {
        Workspace& ws = workspaces_[ci];
        std::vector<double>& g = grad_parts_[ci];
        g.assign(pc, 0.0);
        std::vector<double> dout(out_len);
        double local = 0.0;
        for (std::size_t r = b; r < e; ++r) {
            const double* x = batch.inputs.data() + r * W;
            const double* t = batch.targets.data() + r * out_len;
            const auto& y = net_.forward(x, ws);
            for (std::size_t j = 0; j < out_len; ++j) {
                const double d = y[j] - t[j];
                local += 0.5 * d * d;
                dout[j] = d * gscale;
            }
            net_.backward(dout.data(), ws, g.data());
        }
        loss_parts_[ci] = local;
    });

    double total = 0.0;
    for (std::size_t w = 0; w < used; ++w) total += loss_parts_[w];
    total /= static_cast<double>(rows * out_len);

    if (!std::isfinite(total)) {
        // Rerun serially to name the first layer that produced a non-finite value.
        Workspace& ws = workspaces_[0];
        for (std::size_t r = 0; r < rows; ++r) {
            net_.forward(batch.inputs.data() + r * W, ws);
            for (std::size_t i = 1; i < ws.acts.size(); ++i) {
                if (all_finite(ws.acts[i])) continue;
                const LayerSpec& l = net_.chain()[i - 1];
                throw NumericError("non-finite loss: layer " + std::to_string(i - 1) + " (" +
                                   layer_kind_name(l.kind) + ") produced a non-finite activation");
            }
        }
        throw NumericError("non-finite loss with finite activations (target data non-finite?)");
    }

    // Fixed chunk order keeps the reduction reproducible.
    for (std::size_t w = 0; w < used; ++w) {
        const std::vector<double>& g = grad_parts_[w];
        for (std::size_t k = 0; k < pc; ++k) grads[k] += g[k];
    }
    return total * loss_scale;
}

std::vector<double> backprop_gradients(const Network& net, const WindowBatch& batch,
                                       double loss_scale, double* loss_out) {
    BatchEvaluator eval(net);
    std::vector<double> grads;
    const double loss = eval.loss_and_gradients(batch, grads, loss_scale);
    if (loss_out) *loss_out = loss;
    return grads;
}

std::pair<WindowBatch, WindowBatch> split_validation(const WindowBatch& batch, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ConfigError("split_validation: fraction must lie in (0, 1)");
    const std::size_t rows = batch.count();
    std::size_t val_rows = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(rows)));
    if (val_rows == 0) val_rows = 1;
    if (val_rows >= rows)
        throw ConfigError("split_validation: too few windows to hold out a validation set");
    const std::size_t cut = rows - val_rows;
    return {batch.slice(0, cut), batch.slice(cut, rows)};
}

std::string TrainReport::to_json() const {
    nlohmann::json j;
    j["train_loss"] = train_loss;
    j["val_loss"] = val_loss;
    j["best_epoch"] = best_epoch;
    return j.dump(2);
}

Model train(const NetworkConfig& config, const WindowBatch& train_windows,
            const WindowBatch& val_windows, const TrainOptions& options, const ModelMeta& meta,
            TrainReport* report) {
    if (train_windows.count() == 0 || val_windows.count() == 0)
        throw ConfigError("train: window sets must be nonempty");
    if (options.epochs < 1 || options.batch_size < 1)
        throw ConfigError("train: epochs and batch size must be positive");
    if (!(options.learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");
    if (options.patience < 1) throw ConfigError("train: patience must be at least 1");

    const auto t0 = std::chrono::steady_clock::now();

    Model model{Network(config), meta};
    Network& net = model.net;
    BatchEvaluator eval(net);
    OptimizerState opt = OptimizerState::for_params(net.param_count());
    opt.learning_rate = options.learning_rate;
    BatchShuffler shuffler(train_windows, options.batch_size, derive_seed(config.seed, 1));

    TrainReport rep;
    std::vector<double> grads;
    std::vector<double> best_params = net.params();
    double best_val = std::numeric_limits<double>::infinity();
    int stale = 0;

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        shuffler.start_epoch();
        double epoch_loss = 0.0;
        std::size_t epoch_rows = 0;
        int batch_index = 0;
        while (auto batch = shuffler.next()) {
            double batch_l;
            try {
                batch_l = eval.loss_and_gradients(*batch, grads);
                optimizer_step(net.params(), grads, opt);
            } catch (const NumericError& e) {
                throw TrainingError("diverged at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_index) + ": " + e.what());
            }
            epoch_loss += batch_l * static_cast<double>(batch->count());
            epoch_rows += batch->count();
            ++batch_index;
        }
        rep.train_loss.push_back(epoch_loss / static_cast<double>(epoch_rows));

        const double val = eval.loss(val_windows);
        if (!std::isfinite(val))
            throw TrainingError("diverged at epoch " + std::to_string(epoch) +
                                ": non-finite validation loss");
        rep.val_loss.push_back(val);

        if (val < best_val) {
            best_val = val;
            best_params = net.params();
            rep.best_epoch = epoch;
            stale = 0;
        } else if (++stale >= options.patience) {
            break;
        }
    }

    net.params() = best_params;
    model.meta.epochs_seen = static_cast<int>(rep.train_loss.size());
    rep.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (report) *report = rep;
    return model;
}

HeadComparison compare_heads(const NetworkConfig& base_config, const AlignedPair& train_pair,
                             const AlignedPair& test_pair, const ApplianceProfile& profile,
                             const NormStats& mains_stats, const TrainOptions& options) {
    NetworkConfig point_cfg = base_config;
    point_cfg.head = HeadKind::point;
    NetworkConfig seq_cfg = base_config;
    seq_cfg.head = HeadKind::seq;

    HeadComparison cmp;
    cmp.trunks_matched_at_init =
        Network(point_cfg).trunk_checksum() == Network(seq_cfg).trunk_checksum();

    ModelMeta meta;
    meta.profile = profile;
    meta.profile.window_length = base_config.window_length;
    meta.mains_stats = mains_stats;

    const auto [point_train, point_val] =
        split_validation(make_point_windows(train_pair, meta.profile, mains_stats));
    cmp.point_model = train(point_cfg, point_train, point_val, options, meta, &cmp.point_report);

    const auto [seq_train, seq_val] =
        split_validation(make_seq_windows(train_pair, meta.profile, mains_stats));
    cmp.seq_model = train(seq_cfg, seq_train, seq_val, options, meta, &cmp.seq_report);

    // Same inputs for both heads: the unpadded test windows.
    const WindowBatch test = make_seq_windows(test_pair, meta.profile, mains_stats);
    const std::size_t W = static_cast<std::size_t>(base_config.window_length);
    const std::size_t mid = W / 2;

    BatchEvaluator point_eval(cmp.point_model.net);
    BatchEvaluator seq_eval(cmp.seq_model.net);
    const Tensor point_pred = point_eval.forward_all(test);
    const Tensor seq_pred = seq_eval.forward_all(test);

    double point_sq = 0.0, seq_sq = 0.0;
    for (std::size_t r = 0; r < test.count(); ++r) {
        const double t = test.targets.at(r, mid);
        const double dp = point_pred.at(r, 0) - t;
        const double ds = seq_pred.at(r, mid) - t;
        point_sq += dp * dp;
        seq_sq += ds * ds;
    }
    cmp.point_midpoint_mse = point_sq / static_cast<double>(test.count());
    cmp.seq_midpoint_mse = seq_sq / static_cast<double>(test.count());
    return cmp;
}

std::string HeadComparison::to_kv() const {
    std::ostringstream os;
    os.precision(17);
    os << "point_midpoint_mse " << point_midpoint_mse << '\n';
    os << "seq_midpoint_mse " << seq_midpoint_mse << '\n';
    os << "point_not_worse " << (point_midpoint_mse <= seq_midpoint_mse ? 1 : 0) << '\n';
    os << "trunks_matched_at_init " << (trunks_matched_at_init ? 1 : 0) << '\n';
    os << "point_epochs " << point_report.train_loss.size() << '\n';
    os << "seq_epochs " << seq_report.train_loss.size() << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Checkpoint serialization

namespace {

constexpr char kMagic[8] = {'S', '2', 'P', 'C', 'K', 'P', 'T', '\n'};
constexpr std::uint32_t kVersion = 1;

struct ByteWriter {
    std::string buf;

    void raw(const void* p, std::size_t n) { buf.append(static_cast<const char*>(p), n); }
    void u32(std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        raw(b, 4);
    }
    void u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        raw(b, 8);
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
};

struct ByteReader {
    const unsigned char* p;
    std::size_t remaining;

    void raw(void* out, std::size_t n) {
        if (n > remaining) throw CheckpointError("truncated checkpoint");
        std::memcpy(out, p, n);
        p += n;
        remaining -= n;
    }
    std::uint32_t u32() {
        unsigned char b[4];
        raw(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        unsigned char b[8];
        raw(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        if (n > remaining) throw CheckpointError("truncated checkpoint");
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        remaining -= n;
        return s;
    }
};

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    model.net.require_finite_params();

    ByteWriter w;
    w.raw(kMagic, sizeof kMagic);
    w.u32(kVersion);
    const std::string config_json = model.net.config().to_json();
    w.u64(model.net.config().digest());
    w.str(config_json);

    const ApplianceProfile& prof = model.meta.profile;
    w.str(prof.name);
    w.i32(prof.window_length);
    w.f64(prof.max_power);
    w.f64(prof.on_threshold);
    w.f64(prof.norm_mean);
    w.f64(prof.norm_std);
    w.f64(model.meta.mains_stats.mean);
    w.f64(model.meta.mains_stats.std);
    w.i32(model.meta.epochs_seen);

    const auto& blocks = model.net.blocks();
    const auto& params = model.net.params();
    w.u32(static_cast<std::uint32_t>(blocks.size()));
    for (const ParamBlock& b : blocks) {
        w.str(b.name);
        w.u32(static_cast<std::uint32_t>(b.shape.size()));
        for (std::size_t d : b.shape) w.u64(d);
        for (std::size_t k = 0; k < b.size; ++k) w.f64(params[b.offset + k]);
    }
    w.u64(fnv1a64(w.buf.data(), w.buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < sizeof kMagic + 4 + 8) throw CheckpointError("truncated checkpoint");
    const std::uint64_t stored_hash =
        ByteReader{reinterpret_cast<const unsigned char*>(buf.data()) + buf.size() - 8, 8}.u64();
    if (fnv1a64(buf.data(), buf.size() - 8) != stored_hash)
        throw CheckpointError("corrupt checkpoint: content hash mismatch");

    ByteReader r{reinterpret_cast<const unsigned char*>(buf.data()), buf.size() - 8};
    char magic[sizeof kMagic];
    r.raw(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw CheckpointError("not a checkpoint file: bad magic");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw CheckpointError("checkpoint version " + std::to_string(version) +
                              " unsupported (expected " + std::to_string(kVersion) + ")");
    const std::uint64_t digest = r.u64();
    const std::string config_json = r.str();
    NetworkConfig config = NetworkConfig::from_json(config_json);
    if (config.digest() != digest)
        throw CheckpointError("corrupt checkpoint: config digest mismatch");

    ModelMeta meta;
    meta.profile.name = r.str();
    meta.profile.window_length = r.i32();
    meta.profile.max_power = r.f64();
    meta.profile.on_threshold = r.f64();
    meta.profile.norm_mean = r.f64();
    meta.profile.norm_std = r.f64();
    meta.mains_stats.mean = r.f64();
    meta.mains_stats.std = r.f64();
    meta.epochs_seen = r.i32();
    meta.profile.validate();

    Model model{Network(config), meta};
    Network& net = model.net;
    const std::uint32_t block_count = r.u32();
    if (block_count != net.blocks().size())
        throw CheckpointError("checkpoint block count does not match the config");
    for (const ParamBlock& b : net.blocks()) {
        const std::string name = r.str();
        if (name != b.name)
            throw CheckpointError("checkpoint block '" + name + "' does not match expected '" +
                                  b.name + "'");
        const std::uint32_t ndims = r.u32();
        std::vector<std::size_t> shape(ndims);
        for (auto& d : shape) d = static_cast<std::size_t>(r.u64());
        if (shape != b.shape)
            throw CheckpointError("checkpoint block '" + name + "' has an unexpected shape");
        for (std::size_t k = 0; k < b.size; ++k) net.params()[b.offset + k] = r.f64();
    }
    if (r.remaining != 0) throw CheckpointError("corrupt checkpoint: trailing bytes");
    net.require_finite_params();
    return model;
}

}  // namespace nilm
