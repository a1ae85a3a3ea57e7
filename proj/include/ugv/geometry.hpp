#ifndef UGV_GEOMETRY_HPP
#define UGV_GEOMETRY_HPP

#include <array>
#include <optional>

#include <Eigen/Dense>

namespace ugv {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Pinhole intrinsics with Brown-Conrady distortion (k1, k2, p1, p2).
struct CameraIntrinsics {
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
    double k1 = 0, k2 = 0, p1 = 0, p2 = 0;

    bool has_distortion() const { return k1 != 0 || k2 != 0 || p1 != 0 || p2 != 0; }
};

// Rotation + translation. Maps source-frame points p to R*p + T.
struct RigidPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    // Orthonormality and det(R)==1 within tol.
    bool is_valid(double tol = 1e-9) const;
    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

// Vehicle dimensions in meters.
struct RobotModel {
    double length = 0.72;
    double width = 0.48;
    double height = 0.23;
};

// Angle triple from the Z-X-Y extraction. Fields are named after the formula
// that produces them, not after the rotation axis they recover: theta_x is
// atan2(r13, r33) (the Y-axis angle) and theta_y is asin(-r23) (the X-axis
// angle). See compose_euler_zxy.
struct EulerZXY {
    double theta_z = 0;
    double theta_x = 0;
    double theta_y = 0;
};

// The four top-surface corner coordinates in the robot frame (X starboard,
// Y forward, Z zenith), ordered to match the annotation keypoint order.
std::array<Vec3, 4> robot_keypoints(const RobotModel& model);

// Pinhole projection with distortion applied in normalized camera
// coordinates. Throws BehindCameraError when the transformed point has
// camera-frame depth <= 1e-9 m.
Vec2 project(const RigidPose& pose, const CameraIntrinsics& cam, const Vec3& p3);

// Applies the distortion model to normalized coordinates.
Vec2 distort_normalized(const CameraIntrinsics& cam, const Vec2& xy);
// Inverts the distortion model by fixed-point iteration.
Vec2 undistort_normalized(const CameraIntrinsics& cam, const Vec2& xy);

struct P4PResult {
    RigidPose pose;
    double mean_reproj_px = 0;
    bool converged = false;
    int iterations = 0;
};

// Levenberg-Marquardt minimization of the total squared reprojection error
// over an axis-angle + translation parameterization. Without an initial
// guess, the pose is seeded from a DLT homography between the coplanar model
// points and the (undistorted) pixels. lambda starts at 1e-3, x10 on a
// rejected step, /10 on an accepted one; stops when the step norm drops
// below 1e-10 or after 100 iterations.
P4PResult solve_p4p_lm(const std::array<Vec3, 4>& phi, const std::array<Vec2, 4>& pix,
                       const CameraIntrinsics& cam,
                       const std::optional<RigidPose>& init = std::nullopt);

// Closed-form EPnP using the 3-control-point planar variant. No iterative
// refinement. Throws DegenerateConfigurationError on a rank-deficient
// (e.g. collinear) configuration.
RigidPose solve_p4p_epnp(const std::array<Vec3, 4>& phi, const std::array<Vec2, 4>& pix,
                         const CameraIntrinsics& cam);

// Camera pose w.r.t. the world frame from the pose (R0, T0) of the reference
// placement: Rc = R0', Tc = -R0' * T0. Involutive.
RigidPose camera_extrinsics_from_reference(const RigidPose& r0);

struct WorldPose {
    RigidPose pose;    // Rw = Rc*R, Tw = Tc + Rc*T
    EulerZXY euler;    // extracted from Rw
    bool gimbal_lock = false;
};

// Chains a robot->camera pose with the camera->world pose and extracts the
// attitude angles from Rw:
//   theta_z = atan2(r21, r22), theta_x = atan2(r13, r33), theta_y = asin(-r23)
// with 1-based r_ij. Sets gimbal_lock when |r23| > 1 - 1e-9 (theta_y clamped).
WorldPose pose_to_world(const RigidPose& r, const RigidPose& cam_world);

EulerZXY extract_euler_zxy(const Mat3& r, bool* gimbal_lock = nullptr);

// Inverse of the extraction away from gimbal lock. The matching composition
// is R = Ry(theta_x) * Rx(theta_y) * Rz(theta_z) -- world-frame rotations
// applied in Z, X, Y order, with the per-formula field naming above.
Mat3 compose_euler_zxy(const EulerZXY& e);

// Mean Euclidean pixel distance between project(pose, cam, phi[i]) and pix[i].
double reprojection_error(const RigidPose& pose, const std::array<Vec3, 4>& phi,
                          const std::array<Vec2, 4>& pix, const CameraIntrinsics& cam);

Mat3 rot_x(double a);
Mat3 rot_y(double a);
Mat3 rot_z(double a);
Mat3 rodrigues(const Vec3& axis_angle);

} // namespace ugv

#endif // UGV_GEOMETRY_HPP
