// Python bindings. Arrays cross the boundary as numpy copies so the module
// needs only libtorch, not the torch Python extension.

#include <cstring>
#include <optional>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tryon/config.hpp"
#include "tryon/infer.hpp"
#include "tryon/rejection.hpp"
#include "tryon/ssim.hpp"
#include "tryon/train.hpp"
#include "tryon/warp.hpp"

namespace py = pybind11;
using namespace tryon;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

torch::Tensor to_tensor(const Array& a, torch::Dtype dtype = torch::kFloat32) {
    std::vector<int64_t> shape(a.shape(), a.shape() + a.ndim());
    return torch::from_blob(const_cast<double*>(a.data()), shape, torch::kFloat64).to(dtype).clone();
}

py::array_t<float> to_numpy(const torch::Tensor& t) {
    const auto c = t.detach().to(torch::kFloat32).contiguous();
    py::array_t<float> out(std::vector<py::ssize_t>(c.sizes().begin(), c.sizes().end()));
    std::memcpy(out.mutable_data(), c.data_ptr<float>(), sizeof(float) * static_cast<std::size_t>(c.numel()));
    return out;
}

/// Keyword arguments become "key = value" settings; booleans map to true/false.
RunConfig config_from(const py::kwargs& kwargs) {
    RunConfig c;
    for (const auto& [k, v] : kwargs) {
        const auto key = py::cast<std::string>(k);
        if (py::isinstance<py::bool_>(v)) {
            set_config_value(c, key, py::cast<bool>(v) ? "true" : "false");
        } else {
            set_config_value(c, key, py::cast<std::string>(py::str(v)));
        }
    }
    c.validate();
    return c;
}

py::dict record_dict(const SampleRecord& r) {
    py::dict d;
    d["pair_id"] = r.pair_id;
    d["person"] = to_numpy(r.person);
    d["clothes"] = to_numpy(r.clothes);
    d["clothes_mask"] = to_numpy(r.clothes_mask);
    d["pose"] = to_numpy(r.pose);
    d["parse"] = to_numpy(r.parse);
    d["agnostic_image"] = to_numpy(r.agnostic_image);
    d["agnostic_parse"] = to_numpy(r.agnostic_parse);
    return d;
}

py::dict metrics_dict(const MetricsTable& t) {
    py::dict d;
    d["iteration"] = t.iterations;
    for (const auto& name : t.columns) d[py::str(name)] = t.column(name);
    return d;
}

/// Pipeline plus its data split so Python callers index records by position.
struct PyPipeline {
    TryOnPipeline pipe;
    DataSplits data;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Desk-scale virtual try-on core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<CalibrationError>(m, "CalibrationError", PyExc_ValueError);
    py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

    py::class_<RunConfig>(m, "Config")
        .def(py::init(&config_from))
        .def_static("from_text", [](const std::string& text) { return parse_run_config(text); })
        .def_static("load", [](const std::filesystem::path& p) { return load_run_config(p); })
        .def("to_text", &serialize_run_config)
        .def("set", [](RunConfig& c, const std::string& key, const std::string& value) {
            set_config_value(c, key, value);
            c.validate();
        })
        .def("get",
             [](const RunConfig& c, const std::string& key) {
                 for (const auto& f : config_fields())
                     if (f.key == key) return f.get(c);
                 throw ConfigError("unknown config key '" + key + "'");
             })
        .def("__repr__", [](const RunConfig& c) { return "Config(\n" + serialize_run_config(c) + ")"; });

    m.def("config_fields", [] {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& f : config_fields()) out.emplace_back(f.key, f.help);
        return out;
    });

    m.def(
        "warp", [](const Array& x, const Array& flow) { return to_numpy(warp(to_tensor(x), to_tensor(flow))); },
        py::arg("x"), py::arg("flow"), "Backward bilinear warp of [B, C, H, W] by a [B, 2, H, W] pixel flow.");
    m.def(
        "upsample_flow", [](const Array& flow, int factor) { return to_numpy(upsample_flow(to_tensor(flow), factor)); },
        py::arg("flow"), py::arg("factor"));
    m.def(
        "ssim", [](const Array& a, const Array& b) { return ssim(to_tensor(a), to_tensor(b)); }, py::arg("a"),
        py::arg("b"), "Windowed SSIM of images in [-1, 1].");

    py::class_<RejectionCalibration>(m, "Calibration")
        .def_readonly("L", &RejectionCalibration::L)
        .def_readonly("threshold", &RejectionCalibration::threshold)
        .def_readonly("epsilon", &RejectionCalibration::epsilon)
        .def_readonly("scores", &RejectionCalibration::scores)
        .def("save", [](const RejectionCalibration& c, const std::filesystem::path& p) { save_calibration(p, c); })
        .def_static("load", &load_calibration);
    m.def("estimate_L", &estimate_L, py::arg("scores"), py::arg("threshold") = kDefaultRejectionThreshold,
          py::arg("epsilon") = kDefaultRejectionEpsilon);
    m.def("p_accept", &p_accept, py::arg("d"), py::arg("calibration"));
    m.def(
        "gate",
        [](double d, const RejectionCalibration& c) {
            const auto g = gate(d, c);
            return std::make_pair(g.accept, g.p);
        },
        py::arg("d"), py::arg("calibration"), "Returns (accepted, p_accept).");

    m.def(
        "synthetic_dataset",
        [](std::uint64_t seed, int n, int height, int width, double occlusion_probability) {
            SynthOptions o;
            o.occlusion_probability = occlusion_probability;
            const auto ds = generate_synthetic_dataset(seed, n, {height, width}, LabelPalette::default_palette(), o);
            py::list out;
            for (std::size_t i = 0; i < ds.records.size(); ++i) {
                auto d = record_dict(ds.records[i]);
                d["stripe_period"] = ds.meta[i].person_stripe_period;
                d["occluded"] = ds.meta[i].occluded;
                out.append(d);
            }
            return out;
        },
        py::arg("seed"), py::arg("n"), py::arg("height") = 128, py::arg("width") = 96,
        py::arg("occlusion_probability") = 0.35);

    m.def(
        "train_tocg",
        [](const RunConfig& config, const std::filesystem::path& checkpoint, const std::filesystem::path& metrics,
           const std::optional<std::filesystem::path>& resume) {
            py::gil_scoped_release release;
            apply_runtime(config);
            const auto data = load_data(config, load_palette(config));
            const auto r =
                train_tocg(config, data.train, {checkpoint, metrics, resume.value_or(std::filesystem::path{})});
            return std::make_pair(r.start_iteration, r.end_iteration);
        },
        py::arg("config"), py::arg("checkpoint"), py::arg("metrics"), py::arg("resume") = py::none(),
        "Trains the condition generator; returns (start, end) iteration.");
    m.def(
        "train_toig",
        [](const RunConfig& config, const std::filesystem::path& tocg, const std::filesystem::path& checkpoint,
           const std::filesystem::path& metrics, const std::optional<std::filesystem::path>& resume) {
            py::gil_scoped_release release;
            apply_runtime(config);
            const auto data = load_data(config, load_palette(config));
            const auto r =
                train_toig(config, data.train, tocg, {checkpoint, metrics, resume.value_or(std::filesystem::path{})});
            return std::make_pair(r.start_iteration, r.end_iteration);
        },
        py::arg("config"), py::arg("tocg"), py::arg("checkpoint"), py::arg("metrics"),
        py::arg("resume") = py::none());
    m.def(
        "read_metrics", [](const std::filesystem::path& p) { return metrics_dict(read_metrics(p)); }, py::arg("path"));

    py::class_<PyPipeline>(m, "Pipeline")
        .def(py::init([](const RunConfig& config, const std::filesystem::path& tocg,
                         const std::optional<std::filesystem::path>& toig) {
                 apply_runtime(config);
                 TryOnPipeline pipe(config, tocg, toig.value_or(std::filesystem::path{}));
                 auto data = load_data(config, pipe.palette());
                 return new PyPipeline{std::move(pipe), std::move(data)};
             }),
             py::arg("config"), py::arg("tocg"), py::arg("toig") = py::none())
        .def_property_readonly("test_size", [](const PyPipeline& p) { return p.data.test.size(); })
        .def(
            "run",
            [](PyPipeline& p, const std::vector<int>& persons, const std::vector<int>& garments,
               const std::optional<RejectionCalibration>& calibration) {
                if (persons.size() != garments.size()) throw ContractError("persons and garments differ in length");
                std::vector<SampleRecord> ps, gs;
                for (auto i : persons) ps.push_back(p.data.test.at(static_cast<std::size_t>(i)));
                for (auto i : garments) gs.push_back(p.data.test.at(static_cast<std::size_t>(i)));
                const auto r = p.pipe.run(ps, gs, calibration);
                py::dict d;
                if (r.images.defined()) d["images"] = to_numpy(r.images);
                d["seg"] = to_numpy(r.conditions.seg);
                d["warped_clothes"] = to_numpy(r.conditions.warped_clothes);
                d["d"] = r.d;
                d["p_accept"] = r.p_accept;
                d["accepted"] = r.accepted;
                return d;
            },
            py::arg("persons"), py::arg("garments"), py::arg("calibration") = std::nullopt,
            "Runs test-split persons with the garments of other test records.")
        .def(
            "evaluate",
            [](PyPipeline& p, const std::optional<RejectionCalibration>& calibration) {
                py::gil_scoped_release release;
                const auto rep = evaluate(p.pipe, p.data.test, calibration);
                return std::make_pair(rep.paired_ssim, rep.unpaired_accept_rate);
            },
            py::arg("calibration") = std::nullopt, "Returns (paired SSIM, unpaired acceptance rate) on the test split.");
}
