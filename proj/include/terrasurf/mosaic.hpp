#pragma once

#include "terrasurf/image.hpp"
#include "terrasurf/texmodel.hpp"

#include <cstdint>
#include <vector>

namespace terrasurf {

// Procedural three-class terrain mosaic: one vertical split, the right part
// split horizontally, a permutation assigning {grass, trees, road} to the
// three regions. Textures: grass = band-limited value noise, trees =
// oriented sinusoid lattice, road = smooth ramp with sparse speckles.
// Intensities are in [0,1]; output is deterministic given the spec.
struct MosaicSpec {
    int width = 256;
    int height = 256;
    double split_x = 0.5; // left region width fraction
    double split_y = 0.5; // top-right region height fraction
    int perm = 0;         // region -> class assignment, 0..5

    double grass_cell = 7.0; // value-noise lattice pitch, px
    double grass_amp = 0.26;

    double trees_lambda_u = 11.0; // wavelength across the grain, px
    double trees_lambda_v = 12.5; // along the grain
    double trees_theta_deg = 45.0;
    double trees_amp = 0.30;

    double road_slope = 0.0012; // intensity ramp per px
    double road_speckle_spacing = 9.0;
    double road_speckle_amp = 0.42;

    double noise_sigma = 0.008; // additive per-pixel Gaussian noise
    std::uint64_t seed = 1;
};

// Seeded jitter around the canonical parameters. Split fractions stay in
// [0.35, 0.65], so every class keeps at least 10% of the frame.
MosaicSpec random_mosaic_spec(std::uint64_t seed);

struct Mosaic {
    GrayImage image;
    LabelMap labels;
};

Mosaic gen_mosaic(const MosaicSpec& spec);

// Rigid-scene stand-in for tracking: a far plane (grass | trees, vertical
// split fixed in world coordinates) sliding bg_dx px per frame, and a nearer
// road strip sliding fg_dx px per frame. Two depths keep the epipolar
// geometry well-posed (a single plane would be degenerate).
struct TrackSequenceSpec {
    int width = 256;
    int height = 256;
    int frames = 10;
    double bg_dx = 1.0;
    double fg_dx = 2.0;
    int strip_y0 = 96;
    int strip_y1 = 160; // exclusive
    double noise_sigma = 0.004;
    std::uint64_t seed = 1;
};

std::vector<Mosaic> gen_track_sequence(const TrackSequenceSpec& spec);

} // namespace terrasurf
