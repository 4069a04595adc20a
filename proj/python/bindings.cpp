#include "terrasurf/cli.hpp"
#include "terrasurf/mosaic.hpp"
#include "terrasurf/rng.hpp"
#include "terrasurf/surf.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <stdexcept>
#include <vector>

namespace py = pybind11;

namespace {

py::array_t<double> image_to_array(const terrasurf::GrayImage& img) {
    py::array_t<double> a({img.height, img.width});
    std::memcpy(a.mutable_data(), img.data.data(), img.data.size() * sizeof(double));
    return a;
}

terrasurf::GrayImage array_to_image(const py::array_t<double, py::array::c_style>& a) {
    if (a.ndim() != 2)
        throw std::invalid_argument("image must be a 2D float64 array");
    terrasurf::GrayImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::memcpy(img.data.data(), a.data(), img.data.size() * sizeof(double));
    return img;
}

} // namespace

PYBIND11_MODULE(_terrasurf, m) {
    m.doc() = "terrain texture segmentation and tracking toolkit";
    m.attr("DESCRIPTOR_DIM") = terrasurf::kDescriptorDim;
    m.attr("NUM_CLASSES") = terrasurf::kNumClasses;

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::vector<const char*> argv;
            argv.reserve(args.size() + 1);
            argv.push_back("terrasurf");
            for (const std::string& a : args)
                argv.push_back(a.c_str());
            return terrasurf::run_cli(static_cast<int>(argv.size()), argv.data());
        },
        py::arg("args"),
        "Run a CLI subcommand; returns the exit code (0 ok, 1 usage, 2 data).");

    m.def(
        "gen_mosaic",
        [](std::uint64_t seed, int width, int height) {
            terrasurf::MosaicSpec spec = terrasurf::random_mosaic_spec(seed);
            spec.width = width;
            spec.height = height;
            const terrasurf::Mosaic mos = terrasurf::gen_mosaic(spec);
            py::array_t<int> labels({height, width});
            std::memcpy(labels.mutable_data(), mos.labels.labels.data(),
                        mos.labels.labels.size() * sizeof(int));
            return py::make_tuple(image_to_array(mos.image), labels);
        },
        py::arg("seed"), py::arg("width") = 256, py::arg("height") = 256,
        "Deterministic three-class terrain mosaic: (image[h,w], labels[h,w]).");

    m.def(
        "extract",
        [](const py::array_t<double, py::array::c_style>& image, double threshold, int octaves,
           int grid_cell, int max_features) {
            terrasurf::DetectorParams params;
            params.threshold = threshold;
            params.octaves = octaves;
            params.grid_cell = grid_cell;
            params.max_features = max_features;
            const std::vector<terrasurf::Feature> feats =
                terrasurf::extract(array_to_image(image), params);
            const auto n = static_cast<py::ssize_t>(feats.size());
            py::array_t<double> xys({n, static_cast<py::ssize_t>(4)});
            py::array_t<double> desc({n, static_cast<py::ssize_t>(terrasurf::kDescriptorDim)});
            auto xy = xys.mutable_unchecked<2>();
            auto d = desc.mutable_unchecked<2>();
            for (py::ssize_t i = 0; i < n; ++i) {
                const terrasurf::Feature& f = feats[static_cast<std::size_t>(i)];
                xy(i, 0) = f.point.x;
                xy(i, 1) = f.point.y;
                xy(i, 2) = f.point.scale;
                xy(i, 3) = f.point.strength;
                for (int k = 0; k < terrasurf::kDescriptorDim; ++k)
                    d(i, k) = f.desc[static_cast<std::size_t>(k)];
            }
            return py::make_tuple(xys, desc);
        },
        py::arg("image"), py::arg("threshold") = 1e-4, py::arg("octaves") = 2,
        py::arg("grid_cell") = 16, py::arg("max_features") = 1500,
        "Detect and describe features: ((n,4) [x,y,scale,strength], (n,36) descriptors).");
}
