#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "alens/attributors.hpp"
#include "alens/class_select.hpp"
#include "alens/cli.hpp"
#include "alens/error.hpp"
#include "alens/lens.hpp"
#include "alens/metrics.hpp"
#include "alens/model.hpp"

namespace py = pybind11;
using namespace alens;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const AttributionMap& m) {
    Array out({m.height(), m.width()});
    std::copy(m.values().begin(), m.values().end(), out.mutable_data());
    return out;
}

AttributionMap to_map(const Array& a) {
    if (a.ndim() != 2) throw InvalidInputError("expected a 2-D attribution map");
    return AttributionMap(a.shape(0), a.shape(1), std::vector<double>(a.data(), a.data() + a.size()));
}

AttributionStack to_stack(const Array& a, const std::vector<ClassId>& ids) {
    if (a.ndim() != 3) throw InvalidStackError("expected a C x H x W stack");
    if (static_cast<std::size_t>(a.shape(0)) != ids.size()) {
        throw InvalidStackError("stack has " + std::to_string(a.shape(0)) + " maps but " + std::to_string(ids.size()) +
                                " class ids");
    }
    const auto h = a.shape(1), w = a.shape(2);
    std::vector<AttributionMap> maps;
    for (py::ssize_t k = 0; k < a.shape(0); ++k) {
        const double* p = a.data() + k * h * w;
        maps.emplace_back(h, w, std::vector<double>(p, p + h * w));
    }
    return AttributionStack(ids, std::move(maps));
}

Tensor3 to_tensor(const Array& a) {
    if (a.ndim() == 2) return Tensor3(Shape{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)), 1},
                                      std::vector<double>(a.data(), a.data() + a.size()));
    if (a.ndim() != 3) throw InvalidInputError("expected an H x W or H x W x C image");
    return Tensor3(Shape{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                         static_cast<std::size_t>(a.shape(2))},
                   std::vector<double>(a.data(), a.data() + a.size()));
}

RegionMask to_mask(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw InvalidInputError("expected a 2-D region mask");
    return RegionMask(a.shape(0), a.shape(1), std::vector<bool>(a.data(), a.data() + a.size()));
}

LensConfig lens_config(const std::vector<double>& inverse_temperatures, bool mask) {
    LensConfig c;
    c.inverse_temperatures = inverse_temperatures;
    c.mask_enabled = mask;
    c.validate();
    return c;
}

AttributionMethodSpec method_spec(const std::string& name, std::size_t steps) {
    if (name == "gradient") return Gradient{};
    if (name == "input_x_gradient") return InputXGradient{};
    if (name == "integrated_gradients") return IntegratedGradients{steps, std::nullopt};
    if (name == "occlusion") return Occlusion{};
    if (name == "feature_ablation") return FeatureAblation{};
    throw ConfigError("unknown attribution method '" + name + "'");
}

const std::vector<double> kDefaultScales{1.0, 5.0, 100.0};

struct Model {
    ToyModel inner;
};

}  // namespace

PYBIND11_MODULE(_alens, m) {
    m.doc() = "Class-competitive attribution refinement and its evaluation metrics";

    py::register_exception<Error>(m, "AlensError", PyExc_ValueError);

    m.def(
        "refine",
        [](const Array& stack, const std::vector<ClassId>& class_ids, ClassId target,
           const std::vector<double>& inverse_temperatures, bool mask) {
            return to_numpy(refine(to_stack(stack, class_ids), target, lens_config(inverse_temperatures, mask)));
        },
        py::arg("stack"), py::arg("class_ids"), py::arg("target"), py::arg("inverse_temperatures") = kDefaultScales,
        py::arg("mask") = true, "Refine the target's map against the other classes of a C x H x W stack.");

    m.def(
        "class_distribution",
        [](const Array& stack, const std::vector<ClassId>& class_ids, const std::vector<double>& inverse_temperatures) {
            const auto d = averaged_distribution(to_stack(stack, class_ids), lens_config(inverse_temperatures, true));
            Array out({d.size(), d.height(), d.width()});
            auto* dst = out.mutable_data();
            for (std::size_t k = 0; k < d.size(); ++k) dst = std::copy(d.weights(k).begin(), d.weights(k).end(), dst);
            return out;
        },
        py::arg("stack"), py::arg("class_ids"), py::arg("inverse_temperatures") = kDefaultScales,
        "Pixel-wise softmax over classes, averaged over inverse temperatures.");

    m.def(
        "select_classes",
        [](const std::vector<double>& logits, const std::string& strategy, std::size_t k, bool include_lowest,
           const std::vector<ClassId>& ids) {
            if (strategy == "top_k") return select_classes(logits, TopK{k, include_lowest});
            if (strategy == "best_vs_worst") return select_classes(logits, BestVsWorst{});
            if (strategy == "predefined") return select_classes(logits, Predefined{ids});
            throw ConfigError("unknown class selection strategy '" + strategy + "'");
        },
        py::arg("logits"), py::arg("strategy") = "top_k", py::arg("k") = 2, py::arg("include_lowest") = false,
        py::arg("ids") = std::vector<ClassId>{});

    m.def(
        "localization",
        [](const Array& map, const py::array_t<bool, py::array::c_style | py::array::forcecast>& region, bool blur,
           const std::string& binarization, double threshold) {
            LocalizationOptions o;
            o.blur.enabled = blur;
            o.binarization = binarization == "threshold" ? Binarization::Threshold : Binarization::TopRegionSize;
            o.threshold = threshold;
            const auto r = localization_eval(to_map(map), to_mask(region), o);
            return py::dict(py::arg("ra") = r.ra, py::arg("iou") = r.iou, py::arg("precision") = r.precision,
                            py::arg("recall") = r.recall, py::arg("f1") = r.f1);
        },
        py::arg("map"), py::arg("region"), py::arg("blur") = true, py::arg("binarization") = "top_region",
        py::arg("threshold") = 0.5);

    m.def(
        "similarity",
        [](const Array& a, const Array& b, bool absolute) {
            const auto r = similarity(to_map(a), to_map(b), SimilarityOptions{absolute});
            return py::dict(py::arg("pearson") = r.pearson, py::arg("spearman") = r.spearman,
                            py::arg("cosine") = r.cosine, py::arg("pearson_degenerate") = r.pearson_degenerate,
                            py::arg("spearman_degenerate") = r.spearman_degenerate,
                            py::arg("cosine_degenerate") = r.cosine_degenerate);
        },
        py::arg("a"), py::arg("b"), py::arg("absolute") = true);

    py::class_<Model>(m, "Model")
        .def_static("load", [](const std::string& dir) { return Model{load_model(dir)}; }, py::arg("directory"))
        .def_static(
            "random_mlp",
            [](std::size_t h, std::size_t w, std::size_t c, std::size_t hidden, std::size_t classes,
               std::uint64_t seed) { return Model{make_random_mlp(Shape{h, w, c}, hidden, classes, seed)}; },
            py::arg("height"), py::arg("width"), py::arg("channels"), py::arg("hidden"), py::arg("classes"),
            py::arg("seed"))
        .def_property_readonly("architecture", [](const Model& self) { return architecture_name(self.inner); })
        .def_property_readonly("num_classes", [](const Model& self) { return num_classes(self.inner); })
        .def("logits", [](const Model& self, const Array& x) { return forward_logits(self.inner, to_tensor(x)); })
        .def("probabilities", [](const Model& self, const Array& x) { return predict_probs(self.inner, to_tensor(x)); })
        .def(
            "attribute",
            [](const Model& self, const Array& x, ClassId c, const std::string& method, std::size_t steps) {
                return to_numpy(attribute(self.inner, to_tensor(x), c, method_spec(method, steps)));
            },
            py::arg("image"), py::arg("class_id"), py::arg("method") = "input_x_gradient", py::arg("steps") = 32)
        .def(
            "insertion_auc",
            [](const Model& self, const Array& x, const Array& map, ClassId target, std::size_t steps) {
                return insertion_curve(self.inner, ImageSample(to_tensor(x)), to_map(map), target, {steps, 11, 5.0}).auc;
            },
            py::arg("image"), py::arg("map"), py::arg("target"), py::arg("steps") = 64)
        .def(
            "deletion_auc",
            [](const Model& self, const Array& x, const Array& map, ClassId target, std::size_t steps) {
                return deletion_curve(self.inner, ImageSample(to_tensor(x)), to_map(map), target, {steps, std::nullopt}).auc;
            },
            py::arg("image"), py::arg("map"), py::arg("target"), py::arg("steps") = 64);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = cli::run(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
