// Python bindings over the C++ core. Images cross the boundary as float32
// H x W x C arrays in [0,1]; maps as 2-D arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "crackres/commands.hpp"
#include "crackres/config.hpp"
#include "crackres/datapipe.hpp"
#include "crackres/detector.hpp"
#include "crackres/errors.hpp"
#include "crackres/evalkit.hpp"
#include "crackres/losses.hpp"
#include "crackres/maskgen.hpp"

namespace py = pybind11;
using namespace crackres;

namespace {

using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Image image_from(const F32Array& a) {
    if (a.ndim() != 3) throw DimensionError("python", "image must be an H x W x C array");
    Image im(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)));
    std::memcpy(im.pixels.data(), a.data(), im.size() * sizeof(float));
    return im;
}

F32Array image_to(const Image& im) {
    F32Array a({im.height, im.width, im.channels});
    std::memcpy(a.mutable_data(), im.pixels.data(), im.size() * sizeof(float));
    return a;
}

ErrorMap map_from(const F64Array& a) {
    if (a.ndim() != 2) throw DimensionError("python", "map must be a 2-D array");
    ErrorMap m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::memcpy(m.values.data(), a.data(), m.size() * sizeof(double));
    return m;
}

F64Array map_to(const ScalarMap& m) {
    F64Array a({m.height, m.width});
    std::memcpy(a.mutable_data(), m.values.data(), m.size() * sizeof(double));
    return a;
}

BinaryMap binary_from(const U8Array& a) {
    if (a.ndim() != 2) throw DimensionError("python", "binary map must be a 2-D array");
    BinaryMap m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::memcpy(m.values.data(), a.data(), m.size());
    return m;
}

U8Array binary_to(const std::vector<std::uint8_t>& v, int h, int w) {
    U8Array a({h, w});
    std::memcpy(a.mutable_data(), v.data(), v.size());
    return a;
}

/// N x C x H x W float64 array -> tensor (copied).
torch::Tensor tensor_from(const F64Array& a) {
    if (a.ndim() != 4) throw DimensionError("python", "losses expect N x C x H x W arrays");
    std::vector<std::int64_t> shape(a.shape(), a.shape() + 4);
    return torch::from_blob(const_cast<double*>(a.data()), shape, torch::kFloat64).clone();
}

py::dict metrics_dict(const MetricsReport& r) {
    py::dict d;
    d["precision"] = r.precision;
    d["recall"] = r.recall;
    d["accuracy"] = r.accuracy;
    d["f1"] = r.f1;
    d["iou"] = r.iou;
    return d;
}

}  // namespace

PYBIND11_MODULE(_crackres, m) {
    m.doc() = "Unsupervised crack detection by adversarial image restoration";

    // Later registrations are tried first, so the base class goes first.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);

    m.def(
        "build_mask_pool",
        [](int h, int w, std::vector<int> scales, const std::string& mode, std::uint64_t seed) {
            const auto pool = build_mask_pool(h, w, std::move(scales), parse_mask_mode(mode), seed);
            py::list out;
            for (const auto& mask : pool.masks) out.append(binary_to(mask.grid, mask.height, mask.width));
            return out;
        },
        py::arg("height"), py::arg("width"), py::arg("scales"), py::arg("mode") = "multiscale_square",
        py::arg("seed") = 0, "Masks in complement pairs; 0 marks removed pixels.");

    m.def(
        "corrupt",
        [](const F32Array& image, const U8Array& mask) {
            const Image im = image_from(image);
            Mask mk;
            mk.height = static_cast<int>(mask.shape(0));
            mk.width = static_cast<int>(mask.shape(1));
            mk.grid.assign(mask.data(), mask.data() + mask.size());
            return image_to(corrupt(im, mk));
        },
        py::arg("image"), py::arg("mask"));

    m.def("mae_loss", [](const F64Array& a, const F64Array& b) { return mae_loss(tensor_from(a), tensor_from(b)).item<double>(); });
    m.def("ssim_loss", [](const F64Array& a, const F64Array& b) { return ssim_loss(tensor_from(a), tensor_from(b)).item<double>(); });
    m.def("msgms_loss", [](const F64Array& a, const F64Array& b) { return msgms_loss(tensor_from(a), tensor_from(b)).item<double>(); });
    m.def("gms_map", [](const F64Array& a, const F64Array& b) {
        const auto g = gms_map(tensor_from(a), tensor_from(b)).contiguous();
        F64Array out({g.size(0), g.size(2), g.size(3)});
        std::memcpy(out.mutable_data(), g.data_ptr<double>(), g.numel() * sizeof(double));
        return out;
    });

    m.def("error_map", [](const F32Array& image, const F32Array& restored) {
        return map_to(error_map(image_from(image), image_from(restored)));
    });
    m.def(
        "smooth_bilateral",
        [](const F64Array& map, int diameter, double sigma_intensity, double sigma_spatial) {
            return map_to(smooth_bilateral(map_from(map), {diameter, sigma_intensity, sigma_spatial}));
        },
        py::arg("map"), py::arg("diameter") = 9, py::arg("sigma_intensity") = 75.0, py::arg("sigma_spatial") = 75.0);
    m.def("otsu_level", [](const std::array<std::uint64_t, 256>& hist) { return otsu_level(hist); });
    m.def(
        "otsu_threshold",
        [](const F64Array& map) {
            const auto r = otsu_threshold(map_from(map));
            return py::make_tuple(r.threshold, binary_to(r.binary.values, r.binary.height, r.binary.width), r.no_anomaly);
        },
        "Returns (threshold level, binary map, no_anomaly flag).");

    m.def(
        "detect",
        [](const std::filesystem::path& checkpoint, const F32Array& image, const std::string& strategy) {
            auto restorer = Restorer::from_checkpoint(checkpoint);
            DetectParams p;
            p.strategy = parse_restore_strategy(strategy);
            const auto d = detect(restorer, image_from(image), p);
            py::dict out;
            out["restored"] = image_to(d.restored);
            out["error_map"] = map_to(d.raw);
            out["smoothed"] = map_to(d.smoothed);
            out["mask"] = binary_to(d.otsu.binary.values, d.otsu.binary.height, d.otsu.binary.width);
            out["threshold"] = d.otsu.threshold;
            out["no_anomaly"] = d.otsu.no_anomaly;
            return out;
        },
        py::arg("checkpoint"), py::arg("image"), py::arg("strategy") = "direct");

    m.def("confusion_counts", [](const U8Array& pred, const U8Array& gt) {
        const auto c = confusion_counts(binary_from(pred), binary_from(gt));
        py::dict d;
        d["tp"] = c.tp;
        d["fp"] = c.fp;
        d["tn"] = c.tn;
        d["fn"] = c.fn;
        return d;
    });
    m.def(
        "compute_metrics",
        [](std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
            return metrics_dict(compute_metrics({tp, fp, tn, fn}));
        },
        py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"));
    m.def("auroc", [](const F64Array& scores, const U8Array& labels) {
        return auroc({scores.data(), static_cast<std::size_t>(scores.size())},
                     {labels.data(), static_cast<std::size_t>(labels.size())});
    });

    m.def(
        "generate_synthetic_dataset",
        [](const std::filesystem::path& out, int n_train, int n_test, std::uint64_t seed, int size) {
            SynthOptions opt;
            opt.size = size;
            const auto l = generate_synthetic_dataset(out, n_train, n_test, seed, opt);
            return py::make_tuple(l.train.size(), l.val.size(), l.test.size());
        },
        py::arg("out_root"), py::arg("n_train"), py::arg("n_test"), py::arg("seed") = 0, py::arg("size") = 256);
    m.def("load_image", [](const std::filesystem::path& p, int resolution) { return image_to(load_image(p, resolution)); },
          py::arg("path"), py::arg("resolution") = 0);

    m.def(
        "run",
        [](const std::string& subcommand, const std::map<std::string, std::string>& options) {
            std::vector<std::pair<std::string, std::string>> flags(options.begin(), options.end());
            const RunConfig config = load_config({}, flags);
            py::gil_scoped_release release;
            return run_subcommand(subcommand, config);
        },
        py::arg("subcommand"), py::arg("options") = std::map<std::string, std::string>{},
        "Runs a CLI subcommand with config keys as options; returns the exit code.");
}
