#pragma once

#include "terrasurf/surf.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace terrasurf {

using Mat34 = Eigen::Matrix<double, 3, 4>;

// One-to-one correspondence between a previous-frame and a current-frame
// feature; distance is Euclidean in descriptor space.
struct Match {
    std::size_t prev_index = 0;
    std::size_t curr_index = 0;
    double distance = 0.0;
};

// For each previous feature, candidates lie strictly within image radius r;
// the candidate with minimum descriptor distance is accepted if < theta.
// Conflicts are resolved greedily by ascending distance (losers drop out).
std::vector<Match> match(const std::vector<Feature>& prev, const std::vector<Feature>& curr,
                         double radius = 60.0, double theta = 0.35);

// Normalized eight-point estimate of the fundamental matrix for the epipolar
// constraint curr^T * F * prev = 0 (points homogeneous with z=1). Rank 2,
// unit Frobenius norm, sign fixed so the largest-magnitude entry is positive.
// Throws on < 8 points or a degenerate configuration.
Eigen::Matrix3d eight_point(const std::vector<Eigen::Vector2d>& prev_pts,
                            const std::vector<Eigen::Vector2d>& curr_pts);

// First-order geometric (Sampson) distance of a correspondence to F, pixels.
double sampson_distance(const Eigen::Matrix3d& f, const Eigen::Vector2d& prev_pt,
                        const Eigen::Vector2d& curr_pt);

struct RansacResult {
    Eigen::Matrix3d f;
    std::vector<std::size_t> inliers; // indices into the correspondence list
    int iterations = 0;
};

// Seeded RANSAC over minimal 8-point samples, adaptive iteration count at
// 0.99 confidence capped at max_iters. The final F is re-estimated from all
// inliers of the best model; the returned inlier set is taken against that
// final F. Throws if no model reaches 8 inliers.
RansacResult ransac_f(const std::vector<Eigen::Vector2d>& prev_pts,
                      const std::vector<Eigen::Vector2d>& curr_pts, int max_iters = 2000,
                      double tol = 1.0, std::uint64_t seed = 1);

struct CameraIntrinsics {
    Eigen::Matrix3d w = Eigen::Matrix3d::Identity();

    static CameraIntrinsics from_params(double fx, double fy, double cx, double cy,
                                        double skew = 0.0);
};

// E = W^T F W (single camera for both frames).
Eigen::Matrix3d essential(const Eigen::Matrix3d& f, const CameraIntrinsics& w);

// Projects E onto the essential manifold: singular values (s, s, 0) with
// s the mean of the two largest.
Eigen::Matrix3d balance_essential(const Eigen::Matrix3d& e);

struct RelativePose {
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
};

// Four-fold (R, t) ambiguity resolved by cheirality: the candidate placing a
// strict majority of triangulated correspondences in front of both cameras
// wins; throws on a tie or no majority. t has unit norm (scale is not
// recoverable). Convention: x_curr = R * x_prev + t in normalized camera
// coordinates, i.e. cameras [I|0] (previous) and [R|t] (current).
RelativePose decompose(const Eigen::Matrix3d& e, const std::vector<Eigen::Vector2d>& prev_pts,
                       const std::vector<Eigen::Vector2d>& curr_pts, const CameraIntrinsics& w);

struct TriangulatedPoint {
    Eigen::Vector3d point = Eigen::Vector3d::Zero();
    bool at_infinity = false; // homogeneous w ~ 0; point holds a direction
    bool degenerate = false;  // DLT system rank-deficient (e.g. on the baseline)

    bool ok() const { return !at_infinity && !degenerate; }
};

// Linear (DLT) triangulation of correspondences through two projection
// matrices.
std::vector<TriangulatedPoint> triangulate(const Mat34& p0, const Mat34& p1,
                                           const std::vector<Eigen::Vector2d>& pts0,
                                           const std::vector<Eigen::Vector2d>& pts1);

struct Projection {
    Eigen::Vector2d uv = Eigen::Vector2d::Zero();
    bool behind = false;      // negative depth
    bool at_infinity = false; // homogeneous w ~ 0
};

Projection project(const Mat34& p, const Eigen::Vector3d& m);

Mat34 make_ppm(const CameraIntrinsics& a, const Eigen::Matrix3d& r, const Eigen::Vector3d& t);

struct PoseFilterParams {
    double pos_process_noise = 1e-4;  // acceleration variance driving the CV model
    double pos_meas_noise = 1e-4;     // position measurement variance
    double ori_process_noise = 1e-5;  // angular-acceleration variance
    double ori_meas_noise = 1e-4;     // quaternion measurement variance
    double init_cov = 1.0;            // initial variance of unobserved states
};

// Position: linear Kalman filter on (x, v), constant-velocity model.
// Orientation: EKF on (quaternion, angular velocity), constant-omega model
// with a first-order transition q' = q + dt/2 * q*(0,omega), renormalized
// after every step. Quaternions stored (w, x, y, z); measurement sign is
// aligned to the state before each update.
class PoseFilter {
public:
    explicit PoseFilter(const CameraIntrinsics& a, const PoseFilterParams& params = {});

    bool initialized() const { return initialized_; }

    // Seeds the full state directly (e.g. from known ground truth).
    void init(const Eigen::Vector3d& pos, const Eigen::Vector3d& vel, const Eigen::Vector4d& q,
              const Eigen::Vector3d& omega);

    // Advances the state by dt and returns the predicted PPM A[R|t].
    Mat34 predict(double dt);
    // Absorbs a measured relative pose; the first call initializes the state.
    void update(const Eigen::Matrix3d& r, const Eigen::Vector3d& t);

    Mat34 ppm() const; // PPM at the current state, without advancing

    Eigen::Vector3d position() const { return pos_.head<3>(); }
    Eigen::Vector3d velocity() const { return pos_.tail<3>(); }
    Eigen::Vector4d quaternion() const { return ori_.head<4>(); } // (w,x,y,z)
    Eigen::Vector3d omega() const { return ori_.tail<3>(); }
    const Eigen::Matrix<double, 6, 6>& position_cov() const { return pos_cov_; }
    const Eigen::Matrix<double, 7, 7>& orientation_cov() const { return ori_cov_; }

private:
    CameraIntrinsics a_;
    PoseFilterParams params_;
    bool initialized_ = false;
    Eigen::Matrix<double, 6, 1> pos_ = Eigen::Matrix<double, 6, 1>::Zero();
    Eigen::Matrix<double, 6, 6> pos_cov_ = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 7, 1> ori_ = Eigen::Matrix<double, 7, 1>::Zero();
    Eigen::Matrix<double, 7, 7> ori_cov_ = Eigen::Matrix<double, 7, 7>::Zero();
};

Mat34 predict_pose(PoseFilter& filter, double dt);
void update_pose(PoseFilter& filter, const Eigen::Matrix3d& r, const Eigen::Vector3d& t);

// Copies the previous frame's membership onto each matched current feature;
// unmatched current features are left untouched for fresh classification.
// Throws if a matched previous feature carries no membership.
void transfer_memberships(const std::vector<Match>& matches, const std::vector<Feature>& prev,
                          std::vector<Feature>& curr);

// Rotation matrix from a unit quaternion (w,x,y,z) and back.
Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& q);
Eigen::Vector4d rotation_to_quat(const Eigen::Matrix3d& r);

} // namespace terrasurf
