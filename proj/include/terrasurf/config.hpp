#pragma once

#include "terrasurf/classify.hpp"
#include "terrasurf/segment.hpp"
#include "terrasurf/surf.hpp"
#include "terrasurf/track.hpp"

#include <cstdint>
#include <string>

namespace terrasurf {

// One config drives every command; CLI flags override individual fields.
// All randomness (weight init, RANSAC sampling, mosaic synthesis) is derived
// from `seed` with per-component tags.
struct Config {
    std::uint64_t seed = 1;

    DetectorParams detector;

    std::string classifier = "nn"; // "nn" | "mlp"
    double nn_tau = 0.0;           // 0 = median 1-NN distance at model build
    TrainConfig train;
    int filter_k = 5;     // isolated-feature filter neighbors
    double filter_q = 0.95;
    int dense_k = 5;      // dense/non-dense split neighbors

    SegParams seg;

    double match_radius = 60.0;
    double match_theta = 0.35;
    int ransac_iters = 2000;
    double ransac_tol = 1.0;
    double frame_dt = 1.0;
    PoseFilterParams pose;
    double fx = 200.0, fy = 200.0, cx = 128.0, cy = 128.0, skew = 0.0;

    CameraIntrinsics intrinsics() const {
        return CameraIntrinsics::from_params(fx, fy, cx, cy, skew);
    }

    void validate() const; // throws std::invalid_argument on bad fields
};

// Missing keys keep their defaults; unknown keys are rejected per section.
Config load_config(const std::string& path);
void save_config(const Config& cfg, const std::string& path);

} // namespace terrasurf
