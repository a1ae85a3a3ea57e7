#ifndef UGV_JSONL_HPP
#define UGV_JSONL_HPP

#include <optional>
#include <string>
#include <vector>

#include "ugv/decoding.hpp"
#include "ugv/encoding.hpp"
#include "ugv/geometry.hpp"

namespace ugv {

// Annotation lines: {"image_id": str, "w": int, "h": int,
//                    "kps": [[x, y, v], x4]} with v in {0,1}.
std::vector<Annotation> read_annotations(const std::string& path);
void write_annotations(const std::vector<Annotation>& anns, const std::string& path);

// Detection lines: {"image_id": str, "complete": bool,
//                   "kps": [[x, y, score] | null, x4], "score": float}.
std::vector<Detection> read_detections(const std::string& path);
void write_detections(const std::vector<Detection>& dets, const std::string& path);

// Pose lines emitted by the pose command.
struct PoseRecord {
    std::string image_id;
    Vec3 t_w = Vec3::Zero();
    EulerZXY euler;
    std::string frame = "world"; // "camera" when no cam_to_world block exists
    double reproj_err = 0;
    bool converged = true;
};

std::vector<PoseRecord> read_poses(const std::string& path);
void write_poses(const std::vector<PoseRecord>& poses, const std::string& path);

// Ground-truth pose lines written by the synthetic generator:
// {"image_id": str, "r": [9 row-major], "t": [3]}.
struct TruePose {
    std::string image_id;
    RigidPose pose; // robot -> camera
};

std::vector<TruePose> read_true_poses(const std::string& path);
void write_true_poses(const std::vector<TruePose>& poses, const std::string& path);

// Camera config JSON: {"fx","fy","cx","cy","dist":[k1,k2,p1,p2],
//                      "cam_to_world": {"r":[9],"t":[3]}} (optional block).
struct CameraConfig {
    CameraIntrinsics cam;
    std::optional<RigidPose> cam_to_world;
};

CameraConfig read_camera_config(const std::string& path);
void write_camera_config(const CameraConfig& config, const std::string& path);

} // namespace ugv

#endif // UGV_JSONL_HPP
