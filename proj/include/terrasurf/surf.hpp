// Fast-Hessian interest point detection and the 36-dimensional upright SURF
// descriptor (3x3 subregions x (sum dx, sum dy, sum |dx|, sum |dy|)).
// Orientation assignment is deliberately absent: descriptors are upright.
#pragma once

#include "terrasurf/image.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace terrasurf {

using Descriptor36 = std::array<double, 36>;
using Membership3 = std::array<double, 3>;

constexpr int kDescriptorDim = 36;
constexpr int kNumClasses = 3;

struct InterestPoint {
    int x = 0;
    int y = 0;
    double scale = 0.0;    // 1.2 * filter_size / 9
    double strength = 0.0; // det-of-Hessian response
    int sign = 0;          // laplacian sign bit (trace >= 0)
    int filter_size = 0;   // box filter side length the maximum was found at
};

struct Feature {
    InterestPoint point;
    Descriptor36 desc{};
    int label = 0; // 0 = unlabeled, 1 = grass, 2 = trees, 3 = road
    std::optional<Membership3> membership;
};

struct DetectorParams {
    int octaves = 2;
    int layers_per_octave = 4;
    double threshold = 1e-4; // on area-normalized det-of-Hessian responses
    int grid_cell = 16;      // px; strongest-feature selection cell
    int max_features = 1500;
};

/// One det-of-Hessian layer, full image resolution.
struct ResponseLayer {
    int filter_size = 0;
    double scale = 0.0;
    std::vector<double> resp;      // width*height, row-major
    std::vector<std::uint8_t> sign; // laplacian sign bits
};

struct ResponseStack {
    int width = 0;
    int height = 0;
    std::vector<std::vector<ResponseLayer>> octaves;
};

/// Box filter sizes for one octave (9,15,21,27 / 15,27,39,51 / ...).
std::vector<int> octave_filter_sizes(int octave, int layers);

/// det(H) = Dxx*Dyy - (0.9*Dxy)^2 per pixel and filter size, each derivative
/// normalized by filter area. Throws if the image cannot fit the smallest
/// filter of the requested octaves.
ResponseStack hessian_responses(const IntegralImage& ii, const DetectorParams& params);

/// Strict 3x3x3 scale-space maxima above threshold, strongest first
/// (ties by filter size, then y, then x).
std::vector<InterestPoint> detect(const ResponseStack& stack, const DetectorParams& params);

/// At most one point per grid cell: the strongest, ties broken by (y,x).
std::vector<InterestPoint> grid_select(const std::vector<InterestPoint>& points, int cell,
                                       int width, int height);

/// 36-dim upright descriptor around p. Window spans 12s x 12s (s = scale),
/// 3x3 subregions, 5x5 Haar samples each (wavelet size 2*round(s)), Gaussian
/// weighted with sigma = 3.3s. L2-normalized; a flat patch gives the zero
/// vector.
Descriptor36 describe(const IntegralImage& ii, const InterestPoint& p);

/// detect -> grid_select -> strength cap -> describe. Features come back
/// unlabeled.
std::vector<Feature> extract(const GrayImage& img, const DetectorParams& params);

/// CSV with header x,y,scale,strength,sign,label,d0..d35; doubles printed
/// with 17 significant digits so read(write(f)) == f bit-exactly.
void save_features_csv(const std::vector<Feature>& feats, const std::string& path);
std::vector<Feature> load_features_csv(const std::string& path);

} // namespace terrasurf
