#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "nilm/data_io.hpp"
#include "nilm/inference.hpp"
#include "nilm/introspect.hpp"
#include "nilm/model.hpp"
#include "nilm/network.hpp"
#include "nilm/synth.hpp"

namespace py = pybind11;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

nilm::Tensor to_tensor(const DArray& a) {
    const py::buffer_info info = a.request();
    std::vector<std::size_t> shape(info.shape.begin(), info.shape.end());
    nilm::Tensor t(shape);
    std::copy(static_cast<const double*>(info.ptr),
              static_cast<const double*>(info.ptr) + t.size(), t.data());
    return t;
}

std::vector<double> to_vector(const DArray& a) {
    if (a.ndim() != 1) throw nilm::ConfigError("expected a 1-D array");
    const double* p = a.data();
    return std::vector<double>(p, p + a.shape(0));
}

py::array from_tensor(const nilm::Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::copy(t.data(), t.data() + t.size(), out.mutable_data());
    return out;
}

py::array from_vector(const std::vector<double>& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

nilm::TimeSeries to_series(const DArray& a, std::int64_t interval, std::int64_t start_epoch) {
    nilm::TimeSeries s;
    s.start_epoch = start_epoch;
    s.interval = interval;
    s.values = to_vector(a);
    return s;
}

nilm::ApplianceProfile profile_for(const std::string& name, int window) {
    nilm::ApplianceProfile p = nilm::find_profile(nilm::default_profiles(), name);
    if (window > 0) p.window_length = window;
    p.validate();
    return p;
}

struct PyModel {
    nilm::Model model;

    std::string appliance() const { return model.meta.profile.name; }
    std::string scheme() const { return nilm::head_kind_name(model.net.config().head); }
    int window_length() const { return model.net.config().window_length; }
    int epochs_seen() const { return model.meta.epochs_seen; }

    py::array predict(const DArray& mains, std::int64_t interval, std::int64_t start_epoch) const {
        const nilm::Prediction p =
            nilm::predict(model, to_series(mains, interval, start_epoch));
        return from_vector(p.series.values);
    }

    double midpoint(const DArray& window) const {
        return nilm::midpoint_prediction(model, to_vector(window));
    }

    py::array feature_map(const DArray& window, int layer) const {
        const std::size_t li =
            layer < 0 ? nilm::last_conv_layer(model) : static_cast<std::size_t>(layer);
        const nilm::FeatureMapGrid g = nilm::feature_maps(model, to_vector(window), li);
        nilm::Tensor t({g.filters, g.positions});
        std::copy(g.values.begin(), g.values.end(), t.data());
        return from_tensor(t);
    }

    void save(const std::string& path) const { nilm::save_checkpoint(model, path); }
};

PyModel train_arrays(const DArray& mains, const DArray& appliance, const std::string& name,
                     const std::string& scheme, int window, int epochs, std::size_t batch,
                     std::uint64_t seed, std::int64_t interval, double learning_rate,
                     const std::string& arch) {
    nilm::AlignedPair pair{to_series(mains, interval, 0), to_series(appliance, interval, 0)};
    pair.validate();
    const nilm::ApplianceProfile profile = profile_for(name, window);
    const nilm::NormStats stats = nilm::compute_stats(pair.mains);

    const nilm::HeadKind head =
        nilm::head_kind_from_name(scheme);
    nilm::NetworkConfig config =
        arch == "standard" ? nilm::NetworkConfig::standard(profile.window_length, head, seed)
                           : nilm::NetworkConfig::desk(profile.window_length, head, seed);

    const nilm::WindowBatch all = head == nilm::HeadKind::point
                                      ? nilm::make_point_windows(pair, profile, stats)
                                      : nilm::make_seq_windows(pair, profile, stats);
    const auto [train_windows, val_windows] = nilm::split_validation(all);

    nilm::TrainOptions options;
    options.epochs = epochs;
    options.batch_size = batch;
    options.learning_rate = learning_rate;

    nilm::ModelMeta meta;
    meta.profile = profile;
    meta.mains_stats = stats;
    return PyModel{nilm::train(config, train_windows, val_windows, options, meta)};
}

nilm::Perturbation parse_perturbation(const std::string& kind, double factor) {
    if (kind == "remove") return nilm::Perturbation::remove();
    if (kind == "scale") return nilm::Perturbation::scale(factor);
    if (kind == "stretch") return nilm::Perturbation::stretch(factor);
    throw nilm::ConfigError("unknown perturbation kind '" + kind + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Sequence-to-point / sequence-to-sequence energy disaggregation core";

    py::register_exception<nilm::Error>(m, "NilmError");

    m.def(
        "conv1d",
        [](const DArray& input, const DArray& kernels, const DArray& bias) {
            return from_tensor(
                nilm::conv1d_forward(to_tensor(input), to_tensor(kernels), to_tensor(bias)));
        },
        py::arg("input"), py::arg("kernels"), py::arg("bias"),
        "Same-padded 1-D convolution; input [len] or [channels, len], kernels "
        "[filters, width] or [filters, channels, width].");

    m.def(
        "dense",
        [](const DArray& input, const DArray& weights, const DArray& bias) {
            return from_tensor(
                nilm::dense_forward(to_tensor(input), to_tensor(weights), to_tensor(bias)));
        },
        py::arg("input"), py::arg("weights"), py::arg("bias"));

    m.def(
        "loss_point",
        [](const DArray& pred, const DArray& target) {
            return nilm::loss_point(to_tensor(pred), to_tensor(target));
        },
        py::arg("pred"), py::arg("target"));

    m.def(
        "loss_seq",
        [](const DArray& pred, const DArray& target) {
            return nilm::loss_seq(to_tensor(pred), to_tensor(target));
        },
        py::arg("pred"), py::arg("target"));

    m.def(
        "mae", [](const DArray& pred, const DArray& truth) {
            return nilm::mae(to_vector(pred), to_vector(truth));
        },
        py::arg("pred"), py::arg("truth"));

    m.def(
        "sae", [](const DArray& pred, const DArray& truth) {
            return nilm::sae(to_vector(pred), to_vector(truth));
        },
        py::arg("pred"), py::arg("truth"));

    m.def(
        "perturb",
        [](const DArray& window, const DArray& truth, const std::string& kind, double factor) {
            return from_vector(
                nilm::perturb_window(to_vector(window), to_vector(truth),
                                     parse_perturbation(kind, factor)));
        },
        py::arg("window"), py::arg("truth"), py::arg("kind"), py::arg("factor") = 1.0,
        "kind: remove | scale | stretch");

    m.def(
        "gen_scene",
        [](std::uint64_t seed, double days) {
            const nilm::SyntheticScene scene = nilm::default_scene(seed, days);
            const nilm::SceneData data = nilm::gen_mains(scene);
            py::dict out;
            out["mains"] = from_vector(data.mains.values);
            for (std::size_t i = 0; i < scene.appliances.size(); ++i)
                out[scene.appliances[i].name.c_str()] = from_vector(data.truth[i].values);
            out["interval"] = scene.interval;
            return out;
        },
        py::arg("seed") = 0, py::arg("days") = 1.0,
        "Two-appliance synthetic scene; returns mains plus per-appliance truth.");

    py::class_<PyModel>(m, "Model")
        .def_property_readonly("appliance", &PyModel::appliance)
        .def_property_readonly("scheme", &PyModel::scheme)
        .def_property_readonly("window_length", &PyModel::window_length)
        .def_property_readonly("epochs_seen", &PyModel::epochs_seen)
        .def("predict", &PyModel::predict, py::arg("mains"), py::arg("interval") = 6,
             py::arg("start_epoch") = 0)
        .def("midpoint", &PyModel::midpoint, py::arg("window"))
        .def("feature_map", &PyModel::feature_map, py::arg("window"), py::arg("layer") = -1)
        .def("save", &PyModel::save, py::arg("path"))
        .def_static("load",
                    [](const std::string& path) { return PyModel{nilm::load_checkpoint(path)}; },
                    py::arg("path"));

    m.def("train", &train_arrays, py::arg("mains"), py::arg("appliance"), py::arg("name"),
          py::arg("scheme") = "point", py::arg("window") = 99, py::arg("epochs") = 3,
          py::arg("batch") = 128, py::arg("seed") = 0, py::arg("interval") = 6,
          py::arg("learning_rate") = 1e-3, py::arg("arch") = "desk",
          "Train on aligned mains/appliance arrays; returns a Model.");
}
