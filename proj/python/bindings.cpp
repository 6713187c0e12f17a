#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sdi/architectures.hpp"
#include "sdi/baselines.hpp"
#include "sdi/dataset.hpp"
#include "sdi/evaluation.hpp"
#include "sdi/metrics.hpp"
#include "sdi/model_io.hpp"
#include "sdi/synth.hpp"
#include "sdi/trainer.hpp"

namespace py = pybind11;
using namespace sdi;

namespace {

using ArrF = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ArrD = py::array_t<double, py::array::c_style | py::array::forcecast>;

TensorF tensor_from(const ArrF& a) {
    TensorF t;
    t.dims.assign(a.shape(), a.shape() + a.ndim());
    t.data.assign(a.data(), a.data() + a.size());
    return t;
}

TensorD tensor_from_d(const ArrD& a) {
    TensorD t;
    t.dims.assign(a.shape(), a.shape() + a.ndim());
    t.data.assign(a.data(), a.data() + a.size());
    return t;
}

py::array_t<float> array_from(const TensorF& t) {
    py::array_t<float> out(std::vector<py::ssize_t>(t.dims.begin(), t.dims.end()));
    std::copy(t.data.begin(), t.data.end(), out.mutable_data());
    return out;
}

/// Thin training/inference handle around the CNN core.
struct Model {
    nn::Network<float> net;

    static Model build(const std::string& arch, std::size_t classes, std::size_t input_side,
                       std::size_t fc1, std::size_t fc2, double dropout,
                       std::uint64_t seed) {
        arch::BuildOptions o;
        o.input_side = input_side;
        o.fc1_units = fc1;
        o.fc2_units = fc2;
        o.dropout_rate = dropout;
        o.seed = seed;
        return Model{arch::build<float>(arch, classes, o)};
    }

    static Model load(const std::string& path) { return Model{io::load_model(path)}; }
    void save(const std::string& path, const std::string& metadata) {
        io::save_model(net, path, metadata);
    }

    double train(const std::vector<ArrF>& images, const std::vector<std::size_t>& labels,
                 double eta, double l2, double dropout, std::size_t batch_size,
                 std::size_t iterations, std::uint64_t seed) {
        if (images.size() != labels.size())
            throw std::invalid_argument("images and labels disagree in length");
        nn::TrainSet<float> ts;
        for (const auto& a : images) ts.images.push_back(tensor_from(a));
        ts.labels = labels;
        nn::Hyper hy;
        hy.eta = eta;
        hy.l2 = l2;
        hy.dropout = dropout;
        hy.batch_size = batch_size;
        hy.iterations = iterations;
        hy.seed = seed;
        return nn::train(net, ts, hy).final_loss;
    }

    std::vector<float> classify(const ArrF& image) {
        auto t = tensor_from(image);
        return arch::forward_classify(net, t);
    }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "solar cell surface defect inspection core";

    m.def(
        "conv2d",
        [](const ArrF& input, const ArrF& kernels, const ArrF& bias) {
            nn::ConvLayer<float> p;
            p.kernels = tensor_from(kernels);
            p.bias = tensor_from(bias);
            return array_from(nn::conv2d_forward(tensor_from(input), p));
        },
        py::arg("input"), py::arg("kernels"), py::arg("bias"),
        "SAME-padded convolution of an HxWxC input with OxCxKxK kernels");

    m.def(
        "maxpool2d",
        [](const ArrF& input) { return array_from(nn::maxpool2d_forward(tensor_from(input))); },
        py::arg("input"), "2x2 stride-2 max pooling, odd edges carried over");

    m.def(
        "relu", [](const ArrF& input) { return array_from(nn::relu_forward(tensor_from(input))); },
        py::arg("input"));

    m.def(
        "softmax",
        [](const std::vector<double>& logits) { return nn::softmax(logits); },
        py::arg("logits"));

    py::class_<Model>(m, "Model")
        .def_static("build", &Model::build, py::arg("arch"), py::arg("classes") = 2,
                    py::arg("input_side") = 256, py::arg("fc1") = 256, py::arg("fc2") = 128,
                    py::arg("dropout") = 0.5, py::arg("seed") = 1)
        .def_static("load", &Model::load, py::arg("path"))
        .def("save", &Model::save, py::arg("path"), py::arg("metadata") = "")
        .def("train", &Model::train, py::arg("images"), py::arg("labels"),
             py::arg("eta") = 1e-4, py::arg("l2") = 5e-4, py::arg("dropout") = 0.5,
             py::arg("batch_size") = 32, py::arg("iterations") = 10000, py::arg("seed") = 1)
        .def("classify", &Model::classify, py::arg("image"))
        .def_property_readonly("arch", [](const Model& m_) { return m_.net.arch_id; })
        .def_property_readonly("classes", [](const Model& m_) { return m_.net.num_classes; })
        .def_property_readonly("input_side",
                               [](const Model& m_) { return m_.net.input_side; });

    m.def(
        "lbp_features",
        [](const ArrD& gray, std::size_t regions) {
            return baseline::lbp_features(tensor_from_d(gray), regions);
        },
        py::arg("gray"), py::arg("regions") = 12);

    m.def(
        "hog_features",
        [](const ArrD& gray) { return baseline::hog_features(tensor_from_d(gray)); },
        py::arg("gray"));

    m.def(
        "gabor_features",
        [](const ArrD& gray, std::size_t down_side) {
            return baseline::gabor_raw_features(tensor_from_d(gray), baseline::build_gabor_bank(),
                                                down_side);
        },
        py::arg("gray"), py::arg("down_side") = 10);

    m.def(
        "prf",
        [](const std::vector<int>& preds, const std::vector<int>& truth) {
            auto cm = eval::confusion(preds, truth, 2);
            auto s = eval::prf(cm);
            py::dict out;
            out["precision"] = s.precision;
            out["recall"] = s.recall;
            out["f_measure"] = s.f_measure;
            out["tp"] = s.tp;
            out["fp"] = s.fp;
            out["fn"] = s.fn;
            out["tn"] = s.tn;
            return out;
        },
        py::arg("preds"), py::arg("truth"),
        "binary precision/recall/F with class 1 as the defect class");

    m.def(
        "roc",
        [](const std::vector<double>& scores, const std::vector<int>& truth) {
            auto c = eval::roc_points(scores, truth);
            std::vector<std::tuple<double, double, double>> pts;
            for (const auto& p : c.points) pts.emplace_back(p.threshold, p.fpr, p.tpr);
            return py::make_tuple(pts, c.auc);
        },
        py::arg("scores"), py::arg("truth"), "((threshold, fpr, tpr) list, auc)");

    m.def(
        "stratified_kfold",
        [](const std::vector<int>& labels, std::size_t k, std::uint64_t seed) {
            return data::stratified_kfold(labels, k, seed).test_indices;
        },
        py::arg("labels"), py::arg("k"), py::arg("seed") = 1,
        "per-fold test index lists, class-balanced to +/-1");

    m.def(
        "synth_dataset",
        [](std::size_t side, std::size_t count, std::uint64_t seed) {
            data::SynthSpec spec;
            spec.side = side;
            spec.seed = seed;
            for (int c = 0; c < data::kNumClasses; ++c)
                spec.counts[static_cast<data::Defect>(c)] = count;
            std::vector<std::pair<py::array_t<float>, int>> out;
            for (const auto& im : data::synth_dataset(spec))
                out.emplace_back(array_from(data::resize(im.defective, side)),
                                 static_cast<int>(im.label));
            return out;
        },
        py::arg("side") = 256, py::arg("count") = 10, py::arg("seed") = 1,
        "list of ([0,1] HxWx3 image, class index) pairs, class-major");

    m.def("class_names", [] { return data::class_names(); });

    m.def(
        "slide_positions",
        [](std::size_t extent, std::size_t window, std::size_t stride) {
            return data::slide_positions(extent, window, stride);
        },
        py::arg("extent"), py::arg("window") = 469, py::arg("stride") = 235);
}
