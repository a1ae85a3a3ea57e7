#ifndef UGV_SYNTH_HPP
#define UGV_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ugv/encoding.hpp"
#include "ugv/geometry.hpp"

namespace ugv {

struct SynthParams {
    int n = 1;
    CameraIntrinsics cam{1000.0, 1000.0, 960.0, 540.0};
    int image_w = 1920, image_h = 1080;
    RobotModel model;
    double noise_sigma = 0; // px, Gaussian per coordinate
    uint64_t seed = 1;
    double min_dist = 1.5, max_dist = 8.0; // m
    double max_tilt_deg = 10.0;            // vehicle pitch/roll
    double cam_pitch_deg = 25.0;           // camera looking down
    double margin = 0.08;                  // keep keypoints this fraction away from borders
    // Rejection-sample at most this many times per scene before giving up.
    int max_rejections = 100000;
};

struct SyntheticScene {
    std::string image_id;
    RigidPose pose;                 // robot -> camera
    std::array<Vec2, 4> clean_pix;  // exact projections
    Annotation annotation;          // clean_pix plus noise, all visible
};

// Uniform yaw over (-pi, pi], small pitch/roll, distance in
// [min_dist, max_dist] along a random in-frame ray; scenes are rejected
// until all four projected keypoints land inside the margin. Deterministic
// under seed. Throws FeasibilityError when rejection sampling exhausts.
std::vector<SyntheticScene> generate_scenes(const SynthParams& params);

// Sigma for Gaussian pixel noise whose expected displacement magnitude is
// `mean_displacement` (E||(gx,gy)|| = sigma * sqrt(pi/2)).
double sigma_for_mean_displacement(double mean_displacement);

} // namespace ugv

#endif // UGV_SYNTH_HPP
