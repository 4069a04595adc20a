#include "terrasurf/track.hpp"

#include "terrasurf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace terrasurf {

namespace {

double descriptor_dist2(const Descriptor36& a, const Descriptor36& b) {
    double s = 0.0;
    for (int i = 0; i < kDescriptorDim; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// Similarity transform translating the centroid to the origin and scaling
// the mean distance to sqrt(2). Throws when all points coincide.
Eigen::Matrix3d hartley_transform(const std::vector<Eigen::Vector2d>& pts) {
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    for (const auto& p : pts)
        centroid += p;
    centroid /= static_cast<double>(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts)
        mean_dist += (p - centroid).norm();
    mean_dist /= static_cast<double>(pts.size());
    if (mean_dist < 1e-12)
        throw std::runtime_error("eight_point: degenerate configuration (coincident points)");
    const double s = std::sqrt(2.0) / mean_dist;
    Eigen::Matrix3d t;
    t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
    return t;
}

} // namespace

std::vector<Match> match(const std::vector<Feature>& prev, const std::vector<Feature>& curr,
                         double radius, double theta) {
    std::vector<Match> winners;
    winners.reserve(prev.size());
    const double r2 = radius * radius;
    for (std::size_t i = 0; i < prev.size(); ++i) {
        double best_d2 = std::numeric_limits<double>::infinity();
        std::size_t best_j = 0;
        bool found = false;
        for (std::size_t j = 0; j < curr.size(); ++j) {
            const double dx = curr[j].point.x - prev[i].point.x;
            const double dy = curr[j].point.y - prev[i].point.y;
            if (!(dx * dx + dy * dy < r2))
                continue;
            const double d2 = descriptor_dist2(prev[i].desc, curr[j].desc);
            if (d2 < best_d2) {
                best_d2 = d2;
                best_j = j;
                found = true;
            }
        }
        if (found && std::sqrt(best_d2) < theta)
            winners.push_back({i, best_j, std::sqrt(best_d2)});
    }
    std::stable_sort(winners.begin(), winners.end(), [](const Match& a, const Match& b) {
        if (a.distance != b.distance)
            return a.distance < b.distance;
        return a.prev_index < b.prev_index;
    });
    std::vector<Match> out;
    std::vector<bool> curr_used(curr.size(), false);
    for (const Match& m : winners) {
        if (curr_used[m.curr_index])
            continue;
        curr_used[m.curr_index] = true;
        out.push_back(m);
    }
    std::sort(out.begin(), out.end(),
              [](const Match& a, const Match& b) { return a.prev_index < b.prev_index; });
    return out;
}

Eigen::Matrix3d eight_point(const std::vector<Eigen::Vector2d>& prev_pts,
                            const std::vector<Eigen::Vector2d>& curr_pts) {
    const std::size_t n = prev_pts.size();
    if (n != curr_pts.size())
        throw std::invalid_argument("eight_point: point count mismatch");
    if (n < 8)
        throw std::invalid_argument("eight_point: need at least 8 correspondences");

    const Eigen::Matrix3d t_prev = hartley_transform(prev_pts);
    const Eigen::Matrix3d t_curr = hartley_transform(curr_pts);

    Eigen::MatrixXd a(n, 9);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d m = t_prev * prev_pts[i].homogeneous();
        const Eigen::Vector3d mp = t_curr * curr_pts[i].homogeneous();
        const double x = m.x() / m.z(), y = m.y() / m.z();
        const double xp = mp.x() / mp.z(), yp = mp.y() / mp.z();
        a.row(static_cast<Eigen::Index>(i)) << xp * x, xp * y, xp, yp * x, yp * y, yp, x, y, 1.0;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (sv(7) < 1e-13 * sv(0))
        throw std::runtime_error("eight_point: degenerate configuration (rank-deficient system)");

    const Eigen::VectorXd fvec = svd.matrixV().col(8);
    Eigen::Matrix3d fn;
    fn << fvec(0), fvec(1), fvec(2), fvec(3), fvec(4), fvec(5), fvec(6), fvec(7), fvec(8);

    Eigen::JacobiSVD<Eigen::Matrix3d> fsvd(fn, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Vector3d s = fsvd.singularValues();
    s(2) = 0.0;
    fn = fsvd.matrixU() * s.asDiagonal() * fsvd.matrixV().transpose();

    Eigen::Matrix3d f = t_curr.transpose() * fn * t_prev;
    f /= f.norm();

    Eigen::Index mr = 0, mc = 0;
    f.cwiseAbs().maxCoeff(&mr, &mc);
    if (f(mr, mc) < 0.0)
        f = -f;
    return f;
}

double sampson_distance(const Eigen::Matrix3d& f, const Eigen::Vector2d& prev_pt,
                        const Eigen::Vector2d& curr_pt) {
    const Eigen::Vector3d m = prev_pt.homogeneous();
    const Eigen::Vector3d mp = curr_pt.homogeneous();
    const Eigen::Vector3d fm = f * m;
    const Eigen::Vector3d ftmp = f.transpose() * mp;
    const double num = mp.dot(fm);
    const double den2 = fm(0) * fm(0) + fm(1) * fm(1) + ftmp(0) * ftmp(0) + ftmp(1) * ftmp(1);
    if (den2 <= 0.0)
        return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::abs(num) / std::sqrt(den2);
}

RansacResult ransac_f(const std::vector<Eigen::Vector2d>& prev_pts,
                      const std::vector<Eigen::Vector2d>& curr_pts, int max_iters, double tol,
                      std::uint64_t seed) {
    const std::size_t n = prev_pts.size();
    if (n != curr_pts.size())
        throw std::invalid_argument("ransac_f: point count mismatch");
    if (n < 8)
        throw std::invalid_argument("ransac_f: need at least 8 correspondences");
    if (max_iters < 1 || !(tol > 0.0))
        throw std::invalid_argument("ransac_f: invalid parameters");

    Rng rng(seed);
    auto inliers_of = [&](const Eigen::Matrix3d& f) {
        std::vector<std::size_t> in;
        for (std::size_t i = 0; i < n; ++i)
            if (sampson_distance(f, prev_pts[i], curr_pts[i]) < tol)
                in.push_back(i);
        return in;
    };

    Eigen::Matrix3d best_f = Eigen::Matrix3d::Zero();
    std::vector<std::size_t> best_inliers;
    int required = max_iters;
    int iter = 0;

    std::vector<Eigen::Vector2d> sp(8), sc(8);
    std::size_t sample[8];
    while (iter < required) {
        ++iter;
        for (int k = 0; k < 8;) {
            const std::size_t cand = rng.uniform_index(n);
            if (std::find(sample, sample + k, cand) == sample + k)
                sample[k++] = cand;
        }
        for (int k = 0; k < 8; ++k) {
            sp[static_cast<std::size_t>(k)] = prev_pts[sample[k]];
            sc[static_cast<std::size_t>(k)] = curr_pts[sample[k]];
        }
        Eigen::Matrix3d f;
        try {
            f = eight_point(sp, sc);
        } catch (const std::exception&) {
            continue; // degenerate minimal sample
        }
        std::vector<std::size_t> in = inliers_of(f);
        if (in.size() > best_inliers.size()) {
            best_inliers = std::move(in);
            best_f = f;
            const double w = static_cast<double>(best_inliers.size()) / static_cast<double>(n);
            const double p_outlier_free = std::pow(w, 8);
            if (p_outlier_free >= 1.0) {
                required = iter;
            } else if (p_outlier_free > 0.0) {
                const double need = std::log(1.0 - 0.99) / std::log1p(-p_outlier_free);
                required = static_cast<int>(std::min<double>(max_iters, std::ceil(need)));
                required = std::max(required, iter);
            }
        }
    }

    if (best_inliers.size() < 8)
        throw std::runtime_error("ransac_f: no model with at least 8 inliers");

    // Re-estimate on the consensus set; keep the minimal-sample model if the
    // refit degenerates.
    std::vector<Eigen::Vector2d> ip, ic;
    ip.reserve(best_inliers.size());
    ic.reserve(best_inliers.size());
    for (std::size_t i : best_inliers) {
        ip.push_back(prev_pts[i]);
        ic.push_back(curr_pts[i]);
    }
    try {
        const Eigen::Matrix3d refit = eight_point(ip, ic);
        std::vector<std::size_t> in = inliers_of(refit);
        if (in.size() >= 8) {
            best_f = refit;
            best_inliers = std::move(in);
        }
    } catch (const std::exception&) {
    }

    return {best_f, std::move(best_inliers), iter};
}

CameraIntrinsics CameraIntrinsics::from_params(double fx, double fy, double cx, double cy,
                                               double skew) {
    if (!(fx > 0.0) || !(fy > 0.0))
        throw std::invalid_argument("CameraIntrinsics: focal lengths must be positive");
    CameraIntrinsics c;
    c.w << fx, skew, cx, 0, fy, cy, 0, 0, 1;
    return c;
}

Eigen::Matrix3d essential(const Eigen::Matrix3d& f, const CameraIntrinsics& intr) {
    if (std::abs(intr.w.determinant()) < 1e-12)
        throw std::invalid_argument("essential: singular intrinsics");
    return intr.w.transpose() * f * intr.w;
}

Eigen::Matrix3d balance_essential(const Eigen::Matrix3d& e) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sv = svd.singularValues();
    const double s = 0.5 * (sv(0) + sv(1));
    return svd.matrixU() * Eigen::Vector3d(s, s, 0.0).asDiagonal() * svd.matrixV().transpose();
}

RelativePose decompose(const Eigen::Matrix3d& e, const std::vector<Eigen::Vector2d>& prev_pts,
                       const std::vector<Eigen::Vector2d>& curr_pts, const CameraIntrinsics& intr) {
    if (prev_pts.size() != curr_pts.size() || prev_pts.empty())
        throw std::invalid_argument("decompose: need matching non-empty point lists");

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d u = svd.matrixU();
    Eigen::Matrix3d v = svd.matrixV();
    if (u.determinant() < 0)
        u = -u;
    if (v.determinant() < 0)
        v = -v;
    Eigen::Matrix3d rz;
    rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    const Eigen::Matrix3d r1 = u * rz * v.transpose();
    const Eigen::Matrix3d r2 = u * rz.transpose() * v.transpose();
    const Eigen::Vector3d t = u.col(2);

    const RelativePose candidates[4] = {{r1, t}, {r1, -t}, {r2, t}, {r2, -t}};

    // Cheirality vote in normalized camera coordinates.
    const Eigen::Matrix3d winv = intr.w.inverse();
    std::vector<Eigen::Vector2d> xp, xc;
    xp.reserve(prev_pts.size());
    xc.reserve(prev_pts.size());
    for (std::size_t i = 0; i < prev_pts.size(); ++i) {
        const Eigen::Vector3d a = winv * prev_pts[i].homogeneous();
        const Eigen::Vector3d b = winv * curr_pts[i].homogeneous();
        if (std::abs(a.z()) < 1e-12 || std::abs(b.z()) < 1e-12)
            continue;
        xp.push_back(a.hnormalized());
        xc.push_back(b.hnormalized());
    }
    if (xp.empty())
        throw std::runtime_error("decompose: no usable correspondences for the cheirality vote");

    Mat34 p0 = Mat34::Zero();
    p0.leftCols<3>() = Eigen::Matrix3d::Identity();

    int votes[4] = {0, 0, 0, 0};
    for (int c = 0; c < 4; ++c) {
        Mat34 p1;
        p1.leftCols<3>() = candidates[c].r;
        p1.col(3) = candidates[c].t;
        const std::vector<TriangulatedPoint> pts = triangulate(p0, p1, xp, xc);
        for (const TriangulatedPoint& tp : pts) {
            if (!tp.ok())
                continue;
            const double z0 = tp.point.z();
            const double z1 = (candidates[c].r * tp.point + candidates[c].t).z();
            if (z0 > 0.0 && z1 > 0.0)
                ++votes[c];
        }
    }

    int best = 0;
    for (int c = 1; c < 4; ++c)
        if (votes[c] > votes[best])
            best = c;
    const int n_votes = static_cast<int>(xp.size());
    bool tie = false;
    for (int c = 0; c < 4; ++c)
        if (c != best && votes[c] == votes[best])
            tie = true;
    if (tie || 2 * votes[best] <= n_votes)
        throw std::runtime_error("decompose: cheirality vote has no strict majority");
    return candidates[best];
}

std::vector<TriangulatedPoint> triangulate(const Mat34& p0, const Mat34& p1,
                                           const std::vector<Eigen::Vector2d>& pts0,
                                           const std::vector<Eigen::Vector2d>& pts1) {
    if (pts0.size() != pts1.size())
        throw std::invalid_argument("triangulate: point count mismatch");
    std::vector<TriangulatedPoint> out(pts0.size());
    for (std::size_t i = 0; i < pts0.size(); ++i) {
        Eigen::Matrix4d a;
        a.row(0) = pts0[i].x() * p0.row(2) - p0.row(0);
        a.row(1) = pts0[i].y() * p0.row(2) - p0.row(1);
        a.row(2) = pts1[i].x() * p1.row(2) - p1.row(0);
        a.row(3) = pts1[i].y() * p1.row(2) - p1.row(1);
        Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
        const Eigen::Vector4d sv = svd.singularValues();
        const Eigen::Vector4d x = svd.matrixV().col(3);
        TriangulatedPoint& tp = out[i];
        tp.degenerate = sv(2) < 1e-9 * sv(0);
        tp.at_infinity = std::abs(x(3)) < 1e-12;
        if (tp.at_infinity)
            tp.point = x.head<3>();
        else
            tp.point = x.head<3>() / x(3);
    }
    return out;
}

Projection project(const Mat34& p, const Eigen::Vector3d& m) {
    const Eigen::Vector3d h = p * m.homogeneous();
    Projection pr;
    pr.at_infinity = std::abs(h(2)) <= 1e-12 * h.norm();
    pr.behind = h(2) < 0.0;
    if (!pr.at_infinity)
        pr.uv = h.head<2>() / h(2);
    return pr;
}

Mat34 make_ppm(const CameraIntrinsics& a, const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
    Mat34 rt;
    rt.leftCols<3>() = r;
    rt.col(3) = t;
    return a.w * rt;
}

Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& q) {
    Eigen::Quaterniond eq(q(0), q(1), q(2), q(3));
    eq.normalize();
    return eq.toRotationMatrix();
}

Eigen::Vector4d rotation_to_quat(const Eigen::Matrix3d& r) {
    Eigen::Quaterniond q(r);
    q.normalize();
    Eigen::Vector4d v(q.w(), q.x(), q.y(), q.z());
    if (v(0) < 0.0)
        v = -v;
    return v;
}

namespace {

// q' = q + dt/2 * Omega(omega) * q, the body-frame quaternion derivative.
Eigen::Matrix4d omega_matrix(const Eigen::Vector3d& w) {
    Eigen::Matrix4d o;
    o << 0, -w.x(), -w.y(), -w.z(), w.x(), 0, w.z(), -w.y(), w.y(), -w.z(), 0, w.x(), w.z(),
        w.y(), -w.x(), 0;
    return o;
}

// d(q x (0,omega))/d(omega), 4x3.
Eigen::Matrix<double, 4, 3> xi_matrix(const Eigen::Vector4d& q) {
    Eigen::Matrix<double, 4, 3> xi;
    xi << -q(1), -q(2), -q(3), q(0), -q(3), q(2), q(3), q(0), -q(1), -q(2), q(1), q(0);
    return xi;
}

} // namespace

PoseFilter::PoseFilter(const CameraIntrinsics& a, const PoseFilterParams& params)
    : a_(a), params_(params) {}

void PoseFilter::init(const Eigen::Vector3d& pos, const Eigen::Vector3d& vel,
                      const Eigen::Vector4d& q, const Eigen::Vector3d& omega) {
    const double qn = q.norm();
    if (qn < 1e-12)
        throw std::invalid_argument("PoseFilter::init: zero quaternion");
    pos_.head<3>() = pos;
    pos_.tail<3>() = vel;
    pos_cov_.setZero();
    pos_cov_.topLeftCorner<3, 3>() = params_.pos_meas_noise * Eigen::Matrix3d::Identity();
    pos_cov_.bottomRightCorner<3, 3>() = params_.init_cov * Eigen::Matrix3d::Identity();
    ori_.head<4>() = q / qn;
    ori_.tail<3>() = omega;
    ori_cov_.setZero();
    ori_cov_.topLeftCorner<4, 4>() = params_.ori_meas_noise * Eigen::Matrix4d::Identity();
    ori_cov_.bottomRightCorner<3, 3>() = params_.init_cov * Eigen::Matrix3d::Identity();
    initialized_ = true;
}

Mat34 PoseFilter::predict(double dt) {
    if (!(dt > 0.0))
        throw std::invalid_argument("PoseFilter::predict: dt must be positive");
    if (!initialized_)
        throw std::logic_error("PoseFilter::predict: filter not initialized");

    // Position: constant velocity.
    Eigen::Matrix<double, 6, 6> f = Eigen::Matrix<double, 6, 6>::Identity();
    f.topRightCorner<3, 3>() = dt * Eigen::Matrix3d::Identity();
    pos_ = f * pos_;
    const double qp = params_.pos_process_noise;
    Eigen::Matrix<double, 6, 6> qn = Eigen::Matrix<double, 6, 6>::Zero();
    qn.topLeftCorner<3, 3>() = qp * (dt * dt * dt * dt / 4) * Eigen::Matrix3d::Identity();
    qn.topRightCorner<3, 3>() = qp * (dt * dt * dt / 2) * Eigen::Matrix3d::Identity();
    qn.bottomLeftCorner<3, 3>() = qn.topRightCorner<3, 3>();
    qn.bottomRightCorner<3, 3>() = qp * (dt * dt) * Eigen::Matrix3d::Identity();
    pos_cov_ = f * pos_cov_ * f.transpose() + qn;
    pos_cov_ = 0.5 * (pos_cov_ + pos_cov_.transpose()).eval();

    // Orientation: constant angular velocity, first-order quaternion step.
    const Eigen::Vector4d q = ori_.head<4>();
    const Eigen::Vector3d w = ori_.tail<3>();
    const Eigen::Matrix4d omega = omega_matrix(w);
    Eigen::Vector4d qnew = q + 0.5 * dt * omega * q;
    const double norm = qnew.norm();
    if (norm < 1e-12)
        throw std::runtime_error("PoseFilter::predict: quaternion collapsed");
    qnew /= norm;

    Eigen::Matrix<double, 7, 7> fo = Eigen::Matrix<double, 7, 7>::Identity();
    fo.topLeftCorner<4, 4>() += 0.5 * dt * omega;
    fo.topRightCorner<4, 3>() = 0.5 * dt * xi_matrix(q);

    const Eigen::Matrix<double, 4, 3> xi = xi_matrix(q);
    Eigen::Matrix<double, 7, 3> g = Eigen::Matrix<double, 7, 3>::Zero();
    g.topRows<4>() = 0.25 * dt * dt * xi;
    g.bottomRows<3>() = dt * Eigen::Matrix3d::Identity();

    ori_.head<4>() = qnew;
    ori_cov_ = fo * ori_cov_ * fo.transpose() + params_.ori_process_noise * (g * g.transpose());
    ori_cov_ = 0.5 * (ori_cov_ + ori_cov_.transpose()).eval();

    return ppm();
}

void PoseFilter::update(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
    Eigen::Vector4d z = rotation_to_quat(r);
    if (!initialized_) {
        init(t, Eigen::Vector3d::Zero(), z, Eigen::Vector3d::Zero());
        return;
    }

    // Position measurement: H = [I 0].
    {
        const Eigen::Matrix3d s = pos_cov_.topLeftCorner<3, 3>() +
                                  params_.pos_meas_noise * Eigen::Matrix3d::Identity();
        Eigen::Matrix<double, 6, 3> k =
            pos_cov_.leftCols<3>() * s.ldlt().solve(Eigen::Matrix3d::Identity());
        if (!k.allFinite())
            k.setZero(); // zero-noise degenerate gain; innovation handling below still exact
        const Eigen::Vector3d innov = t - pos_.head<3>();
        pos_ += k * innov;
        Eigen::Matrix<double, 6, 6> ikh = Eigen::Matrix<double, 6, 6>::Identity();
        ikh.leftCols<3>() -= k;
        pos_cov_ = ikh * pos_cov_ * ikh.transpose() +
                   k * (params_.pos_meas_noise * Eigen::Matrix3d::Identity()) * k.transpose();
        pos_cov_ = 0.5 * (pos_cov_ + pos_cov_.transpose()).eval();
    }

    // Orientation measurement: quaternion, sign-aligned to the state.
    {
        if (z.dot(ori_.head<4>()) < 0.0)
            z = -z;
        const Eigen::Matrix4d s = ori_cov_.topLeftCorner<4, 4>() +
                                  params_.ori_meas_noise * Eigen::Matrix4d::Identity();
        Eigen::Matrix<double, 7, 4> k =
            ori_cov_.leftCols<4>() * s.ldlt().solve(Eigen::Matrix4d::Identity());
        if (!k.allFinite())
            k.setZero();
        const Eigen::Vector4d innov = z - ori_.head<4>();
        ori_ += k * innov;
        Eigen::Matrix<double, 7, 7> ikh = Eigen::Matrix<double, 7, 7>::Identity();
        ikh.leftCols<4>() -= k;
        ori_cov_ = ikh * ori_cov_ * ikh.transpose() +
                   k * (params_.ori_meas_noise * Eigen::Matrix4d::Identity()) * k.transpose();
        ori_cov_ = 0.5 * (ori_cov_ + ori_cov_.transpose()).eval();
        const double norm = ori_.head<4>().norm();
        if (norm < 1e-12)
            ori_.head<4>() = z;
        else
            ori_.head<4>() /= norm;
    }
}

Mat34 PoseFilter::ppm() const {
    return make_ppm(a_, quat_to_rotation(quaternion()), position());
}

Mat34 predict_pose(PoseFilter& filter, double dt) { return filter.predict(dt); }

void update_pose(PoseFilter& filter, const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
    filter.update(r, t);
}

void transfer_memberships(const std::vector<Match>& matches, const std::vector<Feature>& prev,
                          std::vector<Feature>& curr) {
    for (const Match& m : matches) {
        if (m.prev_index >= prev.size() || m.curr_index >= curr.size())
            throw std::invalid_argument("transfer_memberships: match index out of range");
        const Feature& src = prev[m.prev_index];
        if (!src.membership)
            throw std::invalid_argument("transfer_memberships: previous feature has no membership");
        curr[m.curr_index].membership = src.membership;
        curr[m.curr_index].label = src.label;
    }
}

} // namespace terrasurf
