#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "nilm/data_io.hpp"
#include "nilm/inference.hpp"
#include "nilm/introspect.hpp"
#include "nilm/model.hpp"
#include "nilm/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonFlags {
    std::string profiles_path;
    std::int64_t interval = 6;
    int threads = 0;
};

void apply_threads(int threads) {
    if (threads > 0) setenv("S2P_THREADS", std::to_string(threads).c_str(), 1);
}

std::vector<nilm::ApplianceProfile> resolve_profiles(const CommonFlags& common) {
    return common.profiles_path.empty() ? nilm::default_profiles()
                                        : nilm::load_profiles(common.profiles_path);
}

nilm::TimeSeries load_scene_channel(const std::string& data_dir, const std::string& name,
                                    std::int64_t interval) {
    const std::string path = (fs::path(data_dir) / (name + ".csv")).string();
    return nilm::load_channel(path, {}, interval);
}

nilm::AlignedPair load_pair(const std::string& data_dir, const std::string& appliance,
                            std::int64_t interval) {
    return nilm::align_resample(load_scene_channel(data_dir, "mains", interval),
                                load_scene_channel(data_dir, appliance, interval), interval);
}

nilm::NetworkConfig make_config(const std::string& config_path, const std::string& arch, int W,
                                nilm::HeadKind head, std::uint64_t seed) {
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw nilm::IoError("cannot open network config: " + config_path);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        nilm::NetworkConfig cfg = nilm::NetworkConfig::from_json(text);
        cfg.head = head;
        cfg.seed = seed;
        if (W > 0) cfg.window_length = W;
        return cfg;
    }
    if (arch == "standard") return nilm::NetworkConfig::standard(W, head, seed);
    if (arch == "desk") return nilm::NetworkConfig::desk(W, head, seed);
    throw nilm::ConfigError("unknown architecture '" + arch + "' (expected desk or standard)");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw nilm::IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw nilm::IoError("failed writing: " + path);
}

int run(int argc, char** argv) {
    CLI::App app{"Sequence-to-point / sequence-to-sequence energy disaggregation"};
    app.require_subcommand(1);

    CommonFlags common;
    app.add_option("--profiles", common.profiles_path, "Appliance profile JSON file");
    app.add_option("--interval", common.interval, "Channel sample interval, seconds")
        ->check(CLI::PositiveNumber);
    app.add_option("--threads", common.threads, "Worker thread cap (0 = auto)");

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "Generate a synthetic scene");
    std::string synth_out = "scene";
    double synth_days = 1.0;
    std::uint64_t synth_seed = 0;
    synth->add_option("--out", synth_out, "Output directory");
    synth->add_option("--days", synth_days, "Scene length in days")->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_seed, "Scene seed");

    // --- train ---
    auto* train_cmd = app.add_subcommand("train", "Train a model on channel files");
    std::string train_data, train_appliance = "kettle", train_scheme = "point";
    std::string train_out = "model.ckpt", train_config, train_arch = "desk", train_report_path;
    int train_epochs = 10, train_window = 0;
    std::size_t train_batch = 128;
    std::uint64_t train_seed = 0;
    double train_val_fraction = 0.1, train_lr = 1e-3;
    int train_patience = 5;
    train_cmd->add_option("--data", train_data, "Directory with mains.csv and <appliance>.csv")
        ->required();
    train_cmd->add_option("--appliance", train_appliance, "Target appliance name");
    train_cmd->add_option("--scheme", train_scheme, "point or seq")
        ->check(CLI::IsMember({"point", "seq"}));
    train_cmd->add_option("--out", train_out, "Checkpoint output path");
    train_cmd->add_option("--report", train_report_path, "TrainReport JSON path");
    train_cmd->add_option("--config", train_config, "Network config JSON (overrides --arch)");
    train_cmd->add_option("--arch", train_arch, "desk or standard");
    train_cmd->add_option("--window", train_window, "Window length W (odd); 0 = architecture default");
    train_cmd->add_option("--epochs", train_epochs, "Max epochs")->check(CLI::PositiveNumber);
    train_cmd->add_option("--batch", train_batch, "Batch size")->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", train_seed, "Training seed");
    train_cmd->add_option("--lr", train_lr, "Learning rate")->check(CLI::PositiveNumber);
    train_cmd->add_option("--patience", train_patience, "Early-stop patience, epochs");
    train_cmd->add_option("--val-fraction", train_val_fraction, "Validation fraction");

    // --- predict ---
    auto* predict_cmd = app.add_subcommand("predict", "Disaggregate a mains channel");
    std::string predict_ckpt, predict_mains, predict_data, predict_out = "trace.csv";
    predict_cmd->add_option("--checkpoint", predict_ckpt, "Model checkpoint")->required();
    predict_cmd->add_option("--mains", predict_mains, "Mains channel file");
    predict_cmd->add_option("--data", predict_data, "Scene directory (uses mains.csv)");
    predict_cmd->add_option("--out", predict_out, "Trace output (epoch,watts lines)");

    // --- eval ---
    auto* eval_cmd = app.add_subcommand("eval", "Score a model against ground truth");
    std::string eval_ckpt, eval_data, eval_out = "eval.txt", eval_trace;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required();
    eval_cmd->add_option("--data", eval_data, "Directory with mains.csv and truth channel")
        ->required();
    eval_cmd->add_option("--out", eval_out, "Report output path");
    eval_cmd->add_option("--trace", eval_trace, "Also write the prediction trace here");

    // --- compare ---
    auto* compare_cmd = app.add_subcommand("compare", "Point vs seq on one trunk and seed");
    std::string cmp_data, cmp_test_data, cmp_appliance = "kettle", cmp_out = "compare";
    std::string cmp_config, cmp_arch = "desk";
    int cmp_epochs = 3, cmp_window = 99;
    std::size_t cmp_batch = 128;
    std::uint64_t cmp_seed = 0;
    compare_cmd->add_option("--data", cmp_data, "Training scene directory")->required();
    compare_cmd->add_option("--test-data", cmp_test_data,
                            "Held-out scene directory (default: temporal tail of --data)");
    compare_cmd->add_option("--appliance", cmp_appliance, "Target appliance name");
    compare_cmd->add_option("--out", cmp_out, "Output directory");
    compare_cmd->add_option("--config", cmp_config, "Network config JSON (overrides --arch)");
    compare_cmd->add_option("--arch", cmp_arch, "desk or standard");
    compare_cmd->add_option("--window", cmp_window, "Window length W (odd)");
    compare_cmd->add_option("--epochs", cmp_epochs, "Max epochs")->check(CLI::PositiveNumber);
    compare_cmd->add_option("--batch", cmp_batch, "Batch size")->check(CLI::PositiveNumber);
    compare_cmd->add_option("--seed", cmp_seed, "Shared trunk/training seed");

    // --- inspect ---
    auto* inspect_cmd = app.add_subcommand("inspect", "Feature-map perturbation study");
    std::string ins_ckpt, ins_scene_json, ins_out = "inspect";
    std::uint64_t ins_seed = 0;
    double ins_days = 1.0;
    int ins_layer = -1;
    std::size_t ins_activation = 0;
    inspect_cmd->add_option("--checkpoint", ins_ckpt, "Point-head model checkpoint")->required();
    inspect_cmd->add_option("--scene", ins_scene_json,
                            "scene.json from `synth` (else --seed/--days regenerate one)");
    inspect_cmd->add_option("--seed", ins_seed, "Scene seed");
    inspect_cmd->add_option("--days", ins_days, "Scene length in days");
    inspect_cmd->add_option("--activation", ins_activation, "Activation index to center on");
    inspect_cmd->add_option("--layer", ins_layer, "Conv chain index (-1 = last conv layer)");
    inspect_cmd->add_option("--out", ins_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    }

    apply_threads(common.threads);

    if (*synth) {
        const nilm::SyntheticScene scene = nilm::default_scene(synth_seed, synth_days);
        const nilm::SceneData data = nilm::gen_mains(scene);
        const auto paths = nilm::save_scene(data, scene.appliances, synth_out);
        json manifest;
        manifest["seed"] = scene.seed;
        manifest["days"] = synth_days;
        manifest["interval"] = scene.interval;
        manifest["length"] = scene.length;
        manifest["noise_std"] = scene.noise_std;
        for (const auto& a : scene.appliances) manifest["appliances"].push_back(a.name);
        manifest["files"] = paths;
        write_text((fs::path(synth_out) / "scene.json").string(), manifest.dump(2) + "\n");
        std::cout << "wrote " << paths.size() << " channels + scene.json under " << synth_out
                  << '\n';
        return 0;
    }

    if (*train_cmd) {
        const auto profiles = resolve_profiles(common);
        nilm::ApplianceProfile profile = nilm::find_profile(profiles, train_appliance);
        if (train_window > 0) profile.window_length = train_window;
        else if (train_config.empty() && train_arch == "desk") profile.window_length = 99;
        profile.validate();

        const nilm::AlignedPair pair = load_pair(train_data, train_appliance, common.interval);
        const nilm::NormStats stats = nilm::compute_stats(pair.mains);
        const nilm::HeadKind head =
            train_scheme == "point" ? nilm::HeadKind::point : nilm::HeadKind::seq;
        const nilm::NetworkConfig config =
            make_config(train_config, train_arch, profile.window_length, head, train_seed);

        const nilm::WindowBatch all =
            head == nilm::HeadKind::point ? nilm::make_point_windows(pair, profile, stats)
                                          : nilm::make_seq_windows(pair, profile, stats);
        const auto [train_windows, val_windows] = nilm::split_validation(all, train_val_fraction);

        nilm::TrainOptions options;
        options.epochs = train_epochs;
        options.batch_size = train_batch;
        options.learning_rate = train_lr;
        options.patience = train_patience;

        nilm::ModelMeta meta;
        meta.profile = profile;
        meta.mains_stats = stats;

        nilm::TrainReport report;
        const nilm::Model model =
            nilm::train(config, train_windows, val_windows, options, meta, &report);
        nilm::save_checkpoint(model, train_out);
        const std::string report_path =
            train_report_path.empty() ? train_out + ".report.json" : train_report_path;
        write_text(report_path, report.to_json() + "\n");
        std::cout << "trained " << train_scheme << " model for " << train_appliance << ": "
                  << report.train_loss.size() << " epochs, best val loss "
                  << report.val_loss[static_cast<std::size_t>(report.best_epoch)] << "\n"
                  << "checkpoint: " << train_out << "\nreport: " << report_path << '\n';
        return 0;
    }

    if (*predict_cmd) {
        const nilm::Model model = nilm::load_checkpoint(predict_ckpt);
        std::string mains_path = predict_mains;
        if (mains_path.empty()) {
            if (predict_data.empty())
                throw nilm::ConfigError("predict: provide --mains or --data");
            mains_path = (fs::path(predict_data) / "mains.csv").string();
        }
        const nilm::TimeSeries mains = nilm::load_channel(mains_path, {}, common.interval);
        const nilm::Prediction prediction = nilm::predict(model, mains);
        nilm::save_trace(prediction, predict_out);
        std::cout << "predicted " << prediction.series.length() << " samples of "
                  << prediction.appliance << " -> " << predict_out << '\n';
        return 0;
    }

    if (*eval_cmd) {
        const nilm::Model model = nilm::load_checkpoint(eval_ckpt);
        const nilm::AlignedPair pair =
            load_pair(eval_data, model.meta.profile.name, common.interval);
        const nilm::EvalReport report = nilm::evaluate(model, pair, model.meta.profile);
        nilm::save_eval_report(report, eval_out);
        if (!eval_trace.empty()) nilm::save_trace(nilm::predict(model, pair.mains), eval_trace);
        std::cout << report.to_kv() << "report: " << eval_out << '\n';
        return 0;
    }

    if (*compare_cmd) {
        const auto profiles = resolve_profiles(common);
        nilm::ApplianceProfile profile = nilm::find_profile(profiles, cmp_appliance);
        profile.window_length = cmp_window;
        profile.validate();

        nilm::AlignedPair train_pair = load_pair(cmp_data, cmp_appliance, common.interval);
        nilm::AlignedPair test_pair;
        if (!cmp_test_data.empty()) {
            test_pair = load_pair(cmp_test_data, cmp_appliance, common.interval);
        } else {
            // hold out the last 20% of the training scene
            const std::size_t n = train_pair.length();
            const std::size_t cut = n - n / 5;
            test_pair = nilm::subpair(train_pair, cut, n - cut);
            train_pair = nilm::subpair(train_pair, 0, cut);
        }
        const nilm::NormStats stats = nilm::compute_stats(train_pair.mains);
        const nilm::NetworkConfig base = make_config(cmp_config, cmp_arch, profile.window_length,
                                                     nilm::HeadKind::point, cmp_seed);
        nilm::TrainOptions options;
        options.epochs = cmp_epochs;
        options.batch_size = cmp_batch;

        const nilm::HeadComparison cmp =
            nilm::compare_heads(base, train_pair, test_pair, profile, stats, options);
        fs::create_directories(cmp_out);
        write_text((fs::path(cmp_out) / "comparison.txt").string(), cmp.to_kv());
        nilm::save_checkpoint(cmp.point_model, (fs::path(cmp_out) / "point.ckpt").string());
        nilm::save_checkpoint(cmp.seq_model, (fs::path(cmp_out) / "seq.ckpt").string());
        std::cout << cmp.to_kv() << "artifacts under " << cmp_out << '\n';
        return 0;
    }

    if (*inspect_cmd) {
        const nilm::Model model = nilm::load_checkpoint(ins_ckpt);
        if (!ins_scene_json.empty()) {
            std::ifstream in(ins_scene_json);
            if (!in) throw nilm::IoError("cannot open scene manifest: " + ins_scene_json);
            json manifest = json::parse(in, nullptr, /*allow_exceptions=*/true);
            ins_seed = manifest.at("seed").get<std::uint64_t>();
            ins_days = manifest.at("days").get<double>();
        }
        const nilm::SyntheticScene scene = nilm::default_scene(ins_seed, ins_days);
        const nilm::SceneData data = nilm::gen_mains(scene);
        std::size_t appliance_index = scene.appliances.size();
        for (std::size_t i = 0; i < scene.appliances.size(); ++i)
            if (scene.appliances[i].name == model.meta.profile.name) appliance_index = i;
        if (appliance_index == scene.appliances.size())
            throw nilm::ConfigError("scene has no appliance named '" + model.meta.profile.name +
                                    "'");
        const std::size_t layer = ins_layer < 0 ? nilm::last_conv_layer(model)
                                                : static_cast<std::size_t>(ins_layer);
        const nilm::PerturbationReport report = nilm::perturbation_experiment(
            model, data, appliance_index, ins_activation, layer);
        nilm::save_perturbation_report(report, ins_out);
        std::cout << "perturbation study (" << report.cases.size() << " cases) for "
                  << report.appliance << " at midpoint " << report.window_midpoint << " -> "
                  << ins_out << '\n';
        return 0;
    }

    return 2;  // unreachable: require_subcommand
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const nilm::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << '\n';
        return 1;
    }
}
