#include "ugv/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "ugv/errors.hpp"

namespace ugv {

namespace {

constexpr double kMinDepth = 1e-9;

Mat3 closest_rotation(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0) {
        Mat3 u = svd.matrixU();
        u.col(2) *= -1.0;
        r = u * svd.matrixV().transpose();
    }
    return r;
}

Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0, -v.z(), v.y(),
         v.z(), 0, -v.x(),
         -v.y(), v.x(), 0;
    return m;
}

// Residuals and (optionally) the Jacobian of the 8-vector of pixel errors
// w.r.t. a local update (delta_omega, delta_t) applied as
// R <- exp([delta_omega]x) * R, T <- T + delta_t.
// Returns false if any point falls at or behind the camera.
bool residuals_and_jacobian(const RigidPose& pose, const std::array<Vec3, 4>& phi,
                            const std::array<Vec2, 4>& pix, const CameraIntrinsics& cam,
                            Eigen::Matrix<double, 8, 1>& r,
                            Eigen::Matrix<double, 8, 6>* jac) {
    for (int i = 0; i < 4; ++i) {
        const Vec3 q = pose.apply(phi[i]);
        if (q.z() <= kMinDepth) return false;
        const double z_inv = 1.0 / q.z();
        const double a = q.x() * z_inv;
        const double b = q.y() * z_inv;
        const Vec2 d = distort_normalized(cam, Vec2(a, b));
        r(2 * i + 0) = cam.fx * d.x() + cam.cx - pix[i].x();
        r(2 * i + 1) = cam.fy * d.y() + cam.cy - pix[i].y();
        if (!jac) continue;

        // d(a,b)/dq
        Eigen::Matrix<double, 2, 3> d_ab_dq;
        d_ab_dq << z_inv, 0, -q.x() * z_inv * z_inv,
                   0, z_inv, -q.y() * z_inv * z_inv;

        // d(distorted)/d(a,b)
        const double r2 = a * a + b * b;
        const double radial = 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2;
        const double dr_d = cam.k1 + 2.0 * cam.k2 * r2; // d(radial)/d(r2)
        Eigen::Matrix2d d_dist;
        d_dist(0, 0) = radial + 2.0 * a * a * dr_d + 2.0 * cam.p1 * b + 6.0 * cam.p2 * a;
        d_dist(0, 1) = 2.0 * a * b * dr_d + 2.0 * cam.p1 * a + 2.0 * cam.p2 * b;
        d_dist(1, 0) = 2.0 * a * b * dr_d + 2.0 * cam.p1 * a + 2.0 * cam.p2 * b;
        d_dist(1, 1) = radial + 2.0 * b * b * dr_d + 6.0 * cam.p1 * b + 2.0 * cam.p2 * a;

        // dq/d(delta_omega) = -[R*phi]x, dq/d(delta_t) = I
        Eigen::Matrix<double, 3, 6> dq;
        dq.block<3, 3>(0, 0) = -skew(pose.rotation * phi[i]);
        dq.block<3, 3>(0, 3) = Mat3::Identity();

        Eigen::Matrix<double, 2, 6> j = d_dist * d_ab_dq * dq;
        j.row(0) *= cam.fx;
        j.row(1) *= cam.fy;
        jac->block<2, 6>(2 * i, 0) = j;
    }
    return true;
}

// Normalized DLT homography from plane coordinates to normalized image
// coordinates, then decomposition into (R, T) for model points lying on the
// z = plane_z plane of the model frame. Both sign branches are resolved by
// requiring positive depths.
RigidPose pose_from_homography(const std::array<Vec2, 4>& plane_pts, double plane_z,
                               const std::array<Vec2, 4>& norm_pts) {
    auto hartley = [](const std::array<Vec2, 4>& pts, std::array<Vec2, 4>& out) {
        Vec2 mean = Vec2::Zero();
        for (const auto& p : pts) mean += p;
        mean /= 4.0;
        double dist = 0;
        for (const auto& p : pts) dist += (p - mean).norm();
        dist /= 4.0;
        const double s = dist < 1e-12 ? 1.0 : std::sqrt(2.0) / dist;
        for (int i = 0; i < 4; ++i) out[i] = (pts[i] - mean) * s;
        Mat3 t;
        t << s, 0, -s * mean.x(),
             0, s, -s * mean.y(),
             0, 0, 1;
        return t;
    };

    std::array<Vec2, 4> src, dst;
    const Mat3 t_src = hartley(plane_pts, src);
    const Mat3 t_dst = hartley(norm_pts, dst);

    Eigen::Matrix<double, 8, 9> A;
    for (int i = 0; i < 4; ++i) {
        const double X = src[i].x(), Y = src[i].y();
        const double u = dst[i].x(), v = dst[i].y();
        A.row(2 * i + 0) << -X, -Y, -1, 0, 0, 0, u * X, u * Y, u;
        A.row(2 * i + 1) << 0, 0, 0, -X, -Y, -1, v * X, v * Y, v;
    }
    Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(A, Eigen::ComputeFullV);
    if (svd.singularValues()(6) < 1e-12 * svd.singularValues()(0))
        throw InitializationError("homography initialization failed: degenerate pixel quad");
    const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
    Mat3 hn;
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    Mat3 H = t_dst.inverse() * hn * t_src;

    const double scale = H.col(0).norm();
    if (scale < 1e-12) throw InitializationError("homography initialization failed: zero scale");

    RigidPose best;
    double best_depth = -1;
    for (const double sign : {1.0, -1.0}) {
        const Mat3 Hs = H * (sign / scale);
        Mat3 rot_cols;
        rot_cols.col(0) = Hs.col(0);
        rot_cols.col(1) = Hs.col(1);
        rot_cols.col(2) = Hs.col(0).cross(Hs.col(1));
        const Mat3 R = closest_rotation(rot_cols);
        const Vec3 T = Hs.col(2) - plane_z * R.col(2);
        double min_depth = 1e30;
        for (const auto& p : plane_pts) {
            const Vec3 q = R * Vec3(p.x(), p.y(), plane_z) + T;
            min_depth = std::min(min_depth, q.z());
        }
        if (min_depth > best_depth) {
            best_depth = min_depth;
            best.rotation = R;
            best.translation = T;
        }
    }
    if (best_depth <= 0)
        throw InitializationError("homography initialization failed: no positive-depth branch");
    return best;
}

} // namespace

bool RigidPose::is_valid(double tol) const {
    const Mat3 rtr = rotation.transpose() * rotation;
    if ((rtr - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(rotation.determinant() - 1.0) <= tol;
}

std::array<Vec3, 4> robot_keypoints(const RobotModel& model) {
    if (model.length <= 0 || model.width <= 0 || model.height <= 0)
        throw ValidationError("robot dimensions must be positive");
    const double hw = model.width / 2, hl = model.length / 2, hh = model.height / 2;
    return {Vec3(-hw, hl, hh), Vec3(-hw, -hl, hh), Vec3(hw, -hl, hh), Vec3(hw, hl, hh)};
}

Vec2 distort_normalized(const CameraIntrinsics& cam, const Vec2& xy) {
    const double x = xy.x(), y = xy.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2;
    return Vec2(x * radial + 2.0 * cam.p1 * x * y + cam.p2 * (r2 + 2.0 * x * x),
                y * radial + cam.p1 * (r2 + 2.0 * y * y) + 2.0 * cam.p2 * x * y);
}

Vec2 undistort_normalized(const CameraIntrinsics& cam, const Vec2& xy) {
    if (!cam.has_distortion()) return xy;
    Vec2 u = xy;
    for (int i = 0; i < 20; ++i) {
        const double x = u.x(), y = u.y();
        const double r2 = x * x + y * y;
        const double radial = 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2;
        u.x() = (xy.x() - (2.0 * cam.p1 * x * y + cam.p2 * (r2 + 2.0 * x * x))) / radial;
        u.y() = (xy.y() - (cam.p1 * (r2 + 2.0 * y * y) + 2.0 * cam.p2 * x * y)) / radial;
    }
    return u;
}

Vec2 project(const RigidPose& pose, const CameraIntrinsics& cam, const Vec3& p3) {
    if (cam.fx <= 0 || cam.fy <= 0) throw ValidationError("focal lengths must be positive");
    const Vec3 q = pose.apply(p3);
    if (q.z() <= kMinDepth) throw BehindCameraError("point at or behind the camera plane");
    const Vec2 d = distort_normalized(cam, Vec2(q.x() / q.z(), q.y() / q.z()));
    return Vec2(cam.fx * d.x() + cam.cx, cam.fy * d.y() + cam.cy);
}

double reprojection_error(const RigidPose& pose, const std::array<Vec3, 4>& phi,
                          const std::array<Vec2, 4>& pix, const CameraIntrinsics& cam) {
    double sum = 0;
    for (int i = 0; i < 4; ++i) sum += (project(pose, cam, phi[i]) - pix[i]).norm();
    return sum / 4.0;
}

P4PResult solve_p4p_lm(const std::array<Vec3, 4>& phi, const std::array<Vec2, 4>& pix,
                       const CameraIntrinsics& cam, const std::optional<RigidPose>& init) {
    for (const auto& p : pix)
        if (!p.allFinite()) throw ValidationError("pixel coordinates must be finite");

    RigidPose pose;
    if (init) {
        pose = *init;
    } else {
        // The four model points are coplanar by construction (z = H/2), so a
        // homography between plane coordinates and undistorted normalized
        // pixels seeds the pose.
        const double plane_z = phi[0].z();
        std::array<Vec2, 4> plane_pts, norm_pts;
        for (int i = 0; i < 4; ++i) {
            plane_pts[i] = Vec2(phi[i].x(), phi[i].y());
            norm_pts[i] = undistort_normalized(
                cam, Vec2((pix[i].x() - cam.cx) / cam.fx, (pix[i].y() - cam.cy) / cam.fy));
        }
        pose = pose_from_homography(plane_pts, plane_z, norm_pts);
    }

    Eigen::Matrix<double, 8, 1> r;
    Eigen::Matrix<double, 8, 6> jac;
    if (!residuals_and_jacobian(pose, phi, pix, cam, r, &jac)) {
        // A behind-camera start can only come from a caller-provided init.
        throw InitializationError("initial pose places points behind the camera");
    }
    double cost = r.squaredNorm();

    double lambda = 1e-3;
    P4PResult result;
    result.pose = pose;
    int iter = 0;
    for (; iter < 100; ++iter) {
        const Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
        const Eigen::Matrix<double, 6, 1> jtr = jac.transpose() * r;
        Eigen::Matrix<double, 6, 6> damped = jtj;
        for (int k = 0; k < 6; ++k)
            damped(k, k) += lambda * std::max(jtj(k, k), 1e-12);
        const Eigen::Matrix<double, 6, 1> step = damped.ldlt().solve(-jtr);

        if (step.norm() < 1e-10) {
            result.converged = true;
            break;
        }

        RigidPose trial;
        trial.rotation = rodrigues(step.head<3>()) * pose.rotation;
        trial.translation = pose.translation + step.tail<3>();

        Eigen::Matrix<double, 8, 1> r_trial;
        Eigen::Matrix<double, 8, 6> jac_trial;
        const bool in_front = residuals_and_jacobian(trial, phi, pix, cam, r_trial, &jac_trial);
        const double cost_trial = in_front ? r_trial.squaredNorm() : 1e300;

        if (in_front && cost_trial <= cost) {
            pose = trial;
            r = r_trial;
            jac = jac_trial;
            cost = cost_trial;
            lambda = std::max(lambda / 10.0, 1e-12);
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break; // stalled; report best-so-far
        }
    }
    result.iterations = iter;
    result.pose = pose;
    double err = 0;
    for (int i = 0; i < 4; ++i)
        err += std::sqrt(r(2 * i) * r(2 * i) + r(2 * i + 1) * r(2 * i + 1));
    result.mean_reproj_px = err / 4.0;
    return result;
}

RigidPose solve_p4p_epnp(const std::array<Vec3, 4>& phi, const std::array<Vec2, 4>& pix,
                         const CameraIntrinsics& cam) {
    for (const auto& p : pix)
        if (!p.allFinite()) throw ValidationError("pixel coordinates must be finite");

    std::array<Vec2, 4> norm_pts;
    for (int i = 0; i < 4; ++i)
        norm_pts[i] = undistort_normalized(
            cam, Vec2((pix[i].x() - cam.cx) / cam.fx, (pix[i].y() - cam.cy) / cam.fy));

    // Collinear image points leave the control-point system rank-deficient.
    double max_area = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            for (int k = j + 1; k < 4; ++k) {
                const Vec2 e1 = norm_pts[j] - norm_pts[i];
                const Vec2 e2 = norm_pts[k] - norm_pts[i];
                max_area = std::max(max_area, std::abs(e1.x() * e2.y() - e1.y() * e2.x()));
            }
    if (max_area < 1e-10)
        throw DegenerateConfigurationError("EPnP: image points are collinear");

    // Three control points: centroid plus the two principal directions of the
    // coplanar model points.
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : phi) centroid += p;
    centroid /= 4.0;
    Mat3 cov = Mat3::Zero();
    for (const auto& p : phi) cov += (p - centroid) * (p - centroid).transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    // Eigenvalues ascending; the plane is spanned by the two largest.
    const Vec3 dir1 = eig.eigenvectors().col(2);
    const Vec3 dir2 = eig.eigenvectors().col(1);
    const double s1 = std::sqrt(std::max(eig.eigenvalues()(2), 0.0) / 4.0);
    const double s2 = std::sqrt(std::max(eig.eigenvalues()(1), 0.0) / 4.0);
    if (s1 < 1e-12 || s2 < 1e-12)
        throw DegenerateConfigurationError("EPnP: model points are collinear");

    const std::array<Vec3, 3> ctrl = {centroid, centroid + s1 * dir1, centroid + s2 * dir2};

    // Barycentric coordinates in the plane basis.
    std::array<Vec3, 4> alphas;
    for (int i = 0; i < 4; ++i) {
        const Vec3 d = phi[i] - centroid;
        const double a = d.dot(dir1) / s1;
        const double b = d.dot(dir2) / s2;
        alphas[i] = Vec3(1.0 - a - b, a, b);
    }

    Eigen::Matrix<double, 8, 9> m;
    for (int i = 0; i < 4; ++i) {
        const double u = norm_pts[i].x(), v = norm_pts[i].y();
        for (int j = 0; j < 3; ++j) {
            const double a = alphas[i](j);
            m(2 * i + 0, 3 * j + 0) = a;
            m(2 * i + 0, 3 * j + 1) = 0;
            m(2 * i + 0, 3 * j + 2) = -a * u;
            m(2 * i + 1, 3 * j + 0) = 0;
            m(2 * i + 1, 3 * j + 1) = a;
            m(2 * i + 1, 3 * j + 2) = -a * v;
        }
    }

    const Eigen::Matrix<double, 9, 9> mtm = m.transpose() * m;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> kernel(mtm);

    // Pairwise control-point distances in the model frame.
    const std::array<std::pair<int, int>, 3> pairs = {{{0, 1}, {0, 2}, {1, 2}}};
    std::array<double, 3> dist2;
    for (int k = 0; k < 3; ++k)
        dist2[k] = (ctrl[pairs[k].first] - ctrl[pairs[k].second]).squaredNorm();

    auto control_points_of = [&](const Eigen::Matrix<double, 9, 1>& x) {
        std::array<Vec3, 3> c;
        for (int j = 0; j < 3; ++j) c[j] = x.segment<3>(3 * j);
        return c;
    };

    auto pose_from_camera_ctrl = [&](std::array<Vec3, 3> cc) -> RigidPose {
        // Flip if the reconstructed points sit behind the camera.
        double mean_z = 0;
        for (int i = 0; i < 4; ++i) {
            const Vec3 pc = alphas[i](0) * cc[0] + alphas[i](1) * cc[1] + alphas[i](2) * cc[2];
            mean_z += pc.z();
        }
        if (mean_z < 0)
            for (auto& c : cc) c = -c;

        std::array<Vec3, 4> cam_pts;
        Vec3 cam_centroid = Vec3::Zero();
        for (int i = 0; i < 4; ++i) {
            cam_pts[i] = alphas[i](0) * cc[0] + alphas[i](1) * cc[1] + alphas[i](2) * cc[2];
            cam_centroid += cam_pts[i];
        }
        cam_centroid /= 4.0;

        Mat3 h = Mat3::Zero();
        for (int i = 0; i < 4; ++i)
            h += (cam_pts[i] - cam_centroid) * (phi[i] - centroid).transpose();
        const Mat3 R = closest_rotation(h);
        RigidPose pose;
        pose.rotation = R;
        pose.translation = cam_centroid - R * centroid;
        return pose;
    };

    auto try_scaled = [&](const Eigen::Matrix<double, 9, 1>& x) -> std::optional<RigidPose> {
        const auto cc = control_points_of(x);
        double num = 0, den = 0;
        for (int k = 0; k < 3; ++k) {
            const double d = (cc[pairs[k].first] - cc[pairs[k].second]).norm();
            num += d * std::sqrt(dist2[k]);
            den += d * d;
        }
        if (den < 1e-20) return std::nullopt;
        const double beta = num / den;
        std::array<Vec3, 3> scaled = {beta * cc[0], beta * cc[1], beta * cc[2]};
        return pose_from_camera_ctrl(scaled);
    };

    const Eigen::Matrix<double, 9, 1> v1 = kernel.eigenvectors().col(0);
    const Eigen::Matrix<double, 9, 1> v2 = kernel.eigenvectors().col(1);

    std::optional<RigidPose> best;
    double best_err = 1e300;
    auto consider = [&](const std::optional<RigidPose>& p) {
        if (!p) return;
        double err = 0;
        try {
            err = reprojection_error(*p, phi, pix, cam);
        } catch (const BehindCameraError&) {
            return;
        }
        if (err < best_err) {
            best_err = err;
            best = p;
        }
    };

    // N = 1 case.
    consider(try_scaled(v1));

    // N = 2 case: solve the linearized distance system for
    // (b11, b12, b22) = (b1^2, b1*b2, b2^2).
    {
        Eigen::Matrix3d l;
        Vec3 rho;
        for (int k = 0; k < 3; ++k) {
            const Vec3 a = v1.segment<3>(3 * pairs[k].first) - v1.segment<3>(3 * pairs[k].second);
            const Vec3 b = v2.segment<3>(3 * pairs[k].first) - v2.segment<3>(3 * pairs[k].second);
            l(k, 0) = a.squaredNorm();
            l(k, 1) = 2.0 * a.dot(b);
            l(k, 2) = b.squaredNorm();
            rho(k) = dist2[k];
        }
        const Vec3 betas = l.fullPivLu().solve(rho);
        const double b11 = betas(0), b12 = betas(1), b22 = betas(2);
        double b1 = std::sqrt(std::abs(b11));
        double b2 = std::sqrt(std::abs(b22));
        if (b11 >= b22) {
            b2 = b1 > 1e-20 ? b12 / b1 : 0.0;
        } else {
            b1 = b2 > 1e-20 ? b12 / b2 : 0.0;
        }
        consider(try_scaled(b1 * v1 + b2 * v2));
    }

    if (!best)
        throw DegenerateConfigurationError("EPnP: no valid solution candidate");
    return *best;
}

RigidPose camera_extrinsics_from_reference(const RigidPose& r0) {
    RigidPose out;
    out.rotation = r0.rotation.transpose();
    out.translation = -(r0.rotation.transpose() * r0.translation);
    return out;
}

EulerZXY extract_euler_zxy(const Mat3& r, bool* gimbal_lock) {
    EulerZXY e;
    // 1-based r_ij: r21 = r(1,0), r22 = r(1,1), r13 = r(0,2), r33 = r(2,2),
    // r23 = r(1,2).
    e.theta_z = std::atan2(r(1, 0), r(1, 1));
    e.theta_x = std::atan2(r(0, 2), r(2, 2));
    double s = -r(1, 2);
    const bool locked = std::abs(s) > 1.0 - 1e-9;
    if (gimbal_lock) *gimbal_lock = locked;
    s = std::clamp(s, -1.0, 1.0);
    e.theta_y = std::asin(s);
    return e;
}

Mat3 rot_x(double a) {
    Mat3 m;
    m << 1, 0, 0,
         0, std::cos(a), -std::sin(a),
         0, std::sin(a), std::cos(a);
    return m;
}

Mat3 rot_y(double a) {
    Mat3 m;
    m << std::cos(a), 0, std::sin(a),
         0, 1, 0,
         -std::sin(a), 0, std::cos(a);
    return m;
}

Mat3 rot_z(double a) {
    Mat3 m;
    m << std::cos(a), -std::sin(a), 0,
         std::sin(a), std::cos(a), 0,
         0, 0, 1;
    return m;
}

Mat3 compose_euler_zxy(const EulerZXY& e) {
    // Verified by the extract->compose round-trip property: atan2(r21, r22)
    // recovers theta_z, atan2(r13, r33) recovers theta_x and asin(-r23)
    // recovers theta_y exactly for this product.
    return rot_y(e.theta_x) * rot_x(e.theta_y) * rot_z(e.theta_z);
}

WorldPose pose_to_world(const RigidPose& r, const RigidPose& cam_world) {
    WorldPose out;
    out.pose.rotation = cam_world.rotation * r.rotation;
    out.pose.translation = cam_world.translation + cam_world.rotation * r.translation;
    out.euler = extract_euler_zxy(out.pose.rotation, &out.gimbal_lock);
    return out;
}

Mat3 rodrigues(const Vec3& axis_angle) {
    const double theta = axis_angle.norm();
    if (theta < 1e-12) {
        // Second-order expansion keeps the map smooth near zero.
        return Mat3::Identity() + skew(axis_angle) + 0.5 * skew(axis_angle) * skew(axis_angle);
    }
    const Vec3 axis = axis_angle / theta;
    const Mat3 k = skew(axis);
    return Mat3::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * k * k;
}

} // namespace ugv
